//! cu-blenders near a periodic point with expanding center.
//!
//! The region carries two branches, both affine return maps of the model.
//! Their center parts form an expanding interval IFS on `I_c`; covering of
//! `I_c` by the two images is certified with outward-rounded intervals, and
//! well-placed strips are driven onto `W^s(p)` by nested center intervals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::affine::{AffineError, AxisBox, BlockAffineMap, Chart, ChartPoint, SplittingDims};
use crate::cycle::{CycleError, Itinerary};
use crate::interval::{add_round, Interval};
use crate::linalg::{rank_of_columns, vec_add, vec_sub, vec_sup};
use crate::periodic::{PeriodicOrbitRecord, StrongHomoclinicCertificate};
use crate::perturbation::{center_shift, compensate_volume, UnfoldedCycle};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BlenderError {
    #[error("precondition: {0}")]
    Precondition(String),
    #[error("no power up to {max_power} reaches center multiplier {threshold}")]
    NoPower { threshold: f64, max_power: usize },
    #[error("no admissible center interval: {0}")]
    NoWindow(String),
    #[error("Markov property fails: {0}")]
    NoMarkov(String),
    #[error("strip is not well placed: {}", .0.join("; "))]
    NotWellPlaced(Vec<String>),
    #[error("covering certificate absent or not certified")]
    NoCovering,
    #[error("strip lost the region crossing at depth {depth}")]
    LostCrossing { depth: usize },
    #[error("max depth {depth} reached, remaining center distance {distance:e}")]
    MaxDepth { depth: usize, distance: f64 },
    #[error(transparent)]
    Affine(#[from] AffineError),
    #[error(transparent)]
    Cycle(#[from] CycleError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeParams<T> {
    pub alpha_uu: T,
    pub alpha_cu: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlenderOptions<T> {
    /// Minimal center multiplier of each branch.
    pub threshold: T,
    pub cones: ConeParams<T>,
    pub strip_radius_ratio: T,
    pub max_power: usize,
}

impl<T: Scalar> Default for BlenderOptions<T> {
    fn default() -> Self {
        Self {
            threshold: T::lit(2.0),
            cones: ConeParams {
                alpha_uu: T::lit(0.1),
                alpha_cu: T::lit(0.1),
            },
            strip_radius_ratio: T::lit(10.0),
            max_power: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch<T> {
    pub map: BlockAffineMap<T>,
    /// Elementary symbols realizing the branch (empty for hand-built ones).
    pub word: Itinerary,
    /// Center translation applied after the word.
    pub shift: T,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlenderRegion<T> {
    pub region: AxisBox<T>,
    pub center_interval: Interval<T>,
    pub branches: Vec<Branch<T>>,
    pub cones: ConeParams<T>,
    pub strip_radius_ratio: T,
    /// Admissible range `(0, s_max]` of `|I_c|` found by bisection.
    pub window: (T, T),
    /// `(i, j, k)`: `R1 = G_a^j`, `R2 = shift o G_b^k o G_a^i`.
    pub powers: (usize, usize, usize),
}

impl<T: Scalar> BlenderRegion<T> {
    /// Hand-built region with center branches `y -> c_i y + b_i` on `I_c`.
    /// The strong blocks are `0.5` and `1 / (0.5 c_i)` so every branch is
    /// conservative.
    pub fn synthetic(dims: SplittingDims, center: &[(T, T)], center_interval: Interval<T>) -> Self {
        let half = T::lit(0.5);
        let branches = center
            .iter()
            .enumerate()
            .map(|(i, &(c, b))| Branch {
                map: BlockAffineMap::scalar_blocks(
                    Chart::P,
                    Chart::P,
                    dims,
                    half,
                    c,
                    T::one() / (half * c.abs()),
                )
                .with_translation(
                    vec![T::zero(); dims.s()],
                    b,
                    vec![T::zero(); dims.u()],
                ),
                word: Itinerary::default(),
                shift: T::zero(),
                label: format!("g{}", i + 1),
            })
            .collect();
        let unit = Interval::new(-half, half);
        Self {
            region: AxisBox {
                chart: Chart::P,
                x: vec![unit; dims.s()],
                y: center_interval,
                z: vec![unit; dims.u()],
            },
            center_interval,
            branches,
            cones: BlenderOptions::default().cones,
            strip_radius_ratio: T::lit(10.0),
            window: (T::zero(), center_interval.width()),
            powers: (0, 0, 0),
        }
    }

    pub fn dims(&self) -> SplittingDims {
        self.branches[0].map.dims()
    }

    pub fn radius(&self) -> T {
        self.region.radius()
    }

    pub fn min_multiplier(&self) -> T {
        self.branches
            .iter()
            .map(|b| b.map.c.abs())
            .fold(T::infinity(), T::min)
    }
}

fn power_reaching<T: Scalar>(base: T, start: T, threshold: T, max_power: usize) -> Option<usize> {
    let mut acc = start;
    for p in 1..=max_power {
        acc = acc * base;
        if acc >= threshold {
            return Some(p);
        }
    }
    None
}

/// Center interval through a word, checking each symbol's box first. Returns
/// the final image or `None` on escape.
fn center_through<T: Scalar>(
    model: &UnfoldedCycle<T>,
    word: &Itinerary,
    shift: T,
    i: Interval<T>,
) -> Option<Interval<T>> {
    let mut cur = i;
    for &sym in &word.0 {
        if !model.model.region(sym).y.contains_interval(&cur) {
            return None;
        }
        let m = model.model.map(sym);
        cur = cur.affine(m.c, m.by);
    }
    Some(cur.add(&Interval::point(shift)))
}

/// Checks that every point of `b` whose image under the word has its strong
/// unstable part in `b.z` stays in the symbol regions along the way.
///
/// The blocks evolve independently, so the x and center ranges are pushed
/// forward while the z range at each step is the preimage of `b.z` under the
/// rest of the word. Pulling the expanding block back keeps the enclosures
/// tight even for long words.
fn cylinder_through<T: Scalar>(
    model: &UnfoldedCycle<T>,
    word: &Itinerary,
    b: &AxisBox<T>,
) -> Result<(), String> {
    let syms = &word.0;
    let mut zs = vec![b.z.clone(); syms.len() + 1];
    for k in (0..syms.len()).rev() {
        let inv = model
            .model
            .map(syms[k])
            .invert()
            .map_err(|e| e.to_string())?;
        let probe = AxisBox {
            chart: syms[k].codomain(),
            x: vec![Interval::point(T::zero()); b.x.len()],
            y: Interval::point(T::zero()),
            z: zs[k + 1].clone(),
        };
        zs[k] = inv.image_box(&probe).map_err(|e| e.to_string())?.z;
    }
    let mut cur = b.clone();
    for (step, &sym) in syms.iter().enumerate() {
        cur.chart = sym.domain();
        cur.z = zs[step].clone();
        if !model.model.region(sym).contains_box(&cur) {
            return Err(format!(
                "step {step} ({sym}) leaves {}: {cur}",
                sym.region_name()
            ));
        }
        cur = model
            .model
            .map(sym)
            .image_box(&cur)
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}

/// Builds the two-branch region from `owner` (expanding center) and a strong
/// homoclinic certificate whose owner it is.
pub fn build_blender<T: Scalar>(
    model: &UnfoldedCycle<T>,
    owner: &PeriodicOrbitRecord<T>,
    cert: &StrongHomoclinicCertificate<T>,
    opts: &BlenderOptions<T>,
) -> Result<BlenderRegion<T>, BlenderError> {
    let ka = owner.center_eigenvalue();
    if !(ka > T::one()) {
        return Err(BlenderError::Precondition(format!(
            "owner center eigenvalue {ka} is not expanding"
        )));
    }
    if !(cert.max_residual() <= T::lit(1e-8)) {
        return Err(BlenderError::Precondition(format!(
            "certificate residual {:e} above 1e-8",
            cert.max_residual()
        )));
    }
    if cert.owner.point != owner.point {
        return Err(BlenderError::Precondition(
            "certificate belongs to another periodic point".into(),
        ));
    }
    let ga = &owner.return_map.g;
    let gb = &cert.partner.return_map.g;
    let k = cert.steps.max(1);
    let kb = cert.partner.center_eigenvalue();
    let no_power = || BlenderError::NoPower {
        threshold: opts.threshold.as_f64(),
        max_power: opts.max_power,
    };
    let j = power_reaching(ka, T::one(), opts.threshold, opts.max_power).ok_or_else(no_power)?;
    let i = power_reaching(
        ka,
        crate::scalar::int_pow(kb, k),
        opts.threshold,
        opts.max_power,
    )
    .ok_or_else(no_power)?;

    let r1 = ga.power(j)?;
    let r2_base = BlockAffineMap::compose(&gb.power(k)?, &ga.power(i)?)?;
    let pass_a = owner.return_map.itinerary();
    let pass_b = cert.partner.return_map.itinerary();
    let mut word1 = Itinerary::default();
    for _ in 0..j {
        word1 = word1.concat(&pass_a);
    }
    let mut word2 = Itinerary::default();
    for _ in 0..i {
        word2 = word2.concat(&pass_a);
    }
    for _ in 0..k {
        word2 = word2.concat(&pass_b);
    }

    let k2 = r2_base.c;
    let y1 = r1.by / (T::one() - r1.c);
    let y2 = r2_base.by / (T::one() - k2);
    let w_y = model.model.w.y;
    // for a given length s: R2 is shifted so its fixed point sits s below
    let layout = |s: T| {
        let sigma = s * (k2 - T::one());
        let ic = Interval::spanning(y1, y2 - s);
        (sigma, ic)
    };
    let admissible = |s: T| {
        let (sigma, ic) = layout(s);
        let a = center_through(model, &word1, T::zero(), ic);
        let b = center_through(model, &word2, sigma, ic);
        matches!((a, b), (Some(a), Some(b)) if w_y.contains_interval(&a) && w_y.contains_interval(&b))
    };
    let mut lo = T::zero();
    let mut hi = w_y.width();
    if admissible(hi) {
        lo = hi;
    } else {
        for _ in 0..80 {
            let mid = (lo + hi) / T::lit(2.0);
            if admissible(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    if !(lo > T::zero()) {
        return Err(BlenderError::NoWindow(
            "no positive interval length keeps both branches admissible".into(),
        ));
    }
    let s_max = lo;
    let s = s_max / T::lit(2.0);
    let (sigma, ic) = layout(s);
    let r2 = BlockAffineMap::compose(&center_shift(&model.model, sigma), &r2_base)?;

    let fix1 = r1
        .fixed_point()
        .ok_or(BlenderError::NoMarkov("R1 has a neutral block".into()))?;
    let fix2 = r2
        .fixed_point()
        .ok_or(BlenderError::NoMarkov("R2 has a neutral block".into()))?;
    let x_mid: Vec<T> = fix1
        .x
        .iter()
        .zip(&fix2.x)
        .map(|(&a, &b)| (a + b) / T::lit(2.0))
        .collect();
    let z_hull: Vec<Interval<T>> = fix1
        .z
        .iter()
        .zip(&fix2.z)
        .map(|(&a, &b)| Interval::spanning(a, b))
        .collect();

    let branches = vec![
        Branch {
            map: r1,
            word: word1,
            shift: T::zero(),
            label: format!("R1 = G_a^{j}"),
        },
        Branch {
            map: r2,
            word: word2,
            shift: sigma,
            label: format!("R2 = shift o G_b^{k} o G_a^{i}"),
        },
    ];

    let markov = |hx: T, hz: T| -> Result<AxisBox<T>, String> {
        let region = AxisBox {
            chart: Chart::P,
            x: x_mid.iter().map(|&c| Interval::centered(c, hx)).collect(),
            y: ic,
            z: z_hull
                .iter()
                .map(|zi| Interval::new(add_round(zi.lo, -hz).0, add_round(zi.hi, hz).1))
                .collect(),
        };
        for br in &branches {
            let img = br.map.image_box(&region).map_err(|e| e.to_string())?;
            if !region
                .x
                .iter()
                .zip(&img.x)
                .all(|(o, i)| o.contains_interval(i))
            {
                return Err(format!("{} does not map X into itself", br.label));
            }
            let inv = br.map.invert().map_err(|e| e.to_string())?;
            let pre = inv.image_box(&region).map_err(|e| e.to_string())?;
            if !region
                .z
                .iter()
                .zip(&pre.z)
                .all(|(o, i)| o.contains_interval(i))
            {
                return Err(format!("{} does not stretch Z across itself", br.label));
            }
            cylinder_through(model, &br.word, &region).map_err(|e| format!("{}: {e}", br.label))?;
        }
        Ok(region)
    };
    let mut hx = s / T::lit(2.0);
    let mut hz = s / T::lit(16.0);
    let mut last = String::new();
    let mut region = None;
    for _ in 0..60 {
        match markov(hx, hz) {
            Ok(r) => {
                region = Some(r);
                break;
            }
            Err(e) => {
                last = e;
                if last.contains("into itself") {
                    hx = hx / T::lit(2.0);
                } else {
                    hz = hz / T::lit(2.0);
                }
            }
        }
    }
    let region = region.ok_or(BlenderError::NoMarkov(last))?;
    Ok(BlenderRegion {
        region,
        center_interval: ic,
        branches,
        cones: opts.cones,
        strip_radius_ratio: opts.strip_radius_ratio,
        window: (T::zero(), s_max),
        powers: (i, j, k),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlenderCertificate<T> {
    pub covered: bool,
    /// Smallest of the branch-image overlap inside `I_c` and the overhang of
    /// the union past each end of `I_c`. Rounded down; negative when the
    /// images do not overlap.
    pub margin: T,
    /// `[overlap, lower overhang, upper overhang]`, each rounded down.
    pub slacks: [T; 3],
    /// Outward-rounded images `R_i^c(I_c)`.
    pub images: Vec<Interval<T>>,
    pub center_interval: Interval<T>,
    /// Where the smallest slack is attained.
    pub weakest_point: T,
    /// First uncovered piece of `I_c`, if any.
    pub gap: Option<Interval<T>>,
}

impl<T: Scalar> BlenderCertificate<T> {
    pub fn certified(&self) -> bool {
        self.covered && self.margin > T::zero()
    }
}

/// Image of `ic` under `y -> c y + b`, shrunk inward by the rounding error
/// (every point of the returned interval is certainly in the exact image).
fn inner_image<T: Scalar>(ic: Interval<T>, c: T, b: T) -> Interval<T> {
    let e_lo = Interval::point(ic.lo).affine(c, b);
    let e_hi = Interval::point(ic.hi).affine(c, b);
    let (a, z) = if c > T::zero() {
        (e_lo, e_hi)
    } else {
        (e_hi, e_lo)
    };
    Interval { lo: a.hi, hi: z.lo }
}

/// Certifies `I_c ⊆ ∪ R_i^c(I_c)` and its margin.
pub fn verify_covering<T: Scalar>(region: &BlenderRegion<T>) -> BlenderCertificate<T> {
    let ic = region.center_interval;
    let images: Vec<Interval<T>> = region
        .branches
        .iter()
        .map(|b| ic.affine(b.map.c, b.map.by))
        .collect();
    let mut inner: Vec<Interval<T>> = region
        .branches
        .iter()
        .map(|b| inner_image(ic, b.map.c, b.map.by))
        .collect();
    inner.sort_by(|a, b| a.lo.partial_cmp(&b.lo).unwrap_or(std::cmp::Ordering::Equal));

    // overlap of consecutive images, clipped to I_c
    let mut overlap = (T::infinity(), ic.mid());
    for w in inner.windows(2) {
        let lo = w[1].lo.max(ic.lo);
        let hi = w[0].hi.min(w[1].hi).min(ic.hi);
        let width = add_round(hi, -lo).0;
        if width < overlap.0 {
            overlap = (width, lo + (hi - lo) / T::lit(2.0));
        }
    }
    let lowest = inner.iter().map(|i| i.lo).fold(T::infinity(), T::min);
    let highest = inner.iter().map(|i| i.hi).fold(T::neg_infinity(), T::max);
    let slacks = [
        overlap.0,
        add_round(ic.lo, -lowest).0,
        add_round(highest, -ic.hi).0,
    ];
    let points = [overlap.1, ic.lo, ic.hi];
    let (k, margin) =
        slacks.iter().enumerate().fold(
            (0, T::infinity()),
            |acc, (k, &v)| if v < acc.1 { (k, v) } else { acc },
        );
    let gap = first_gap(ic, &inner);
    BlenderCertificate {
        covered: gap.is_none(),
        margin,
        slacks,
        images,
        center_interval: ic,
        weakest_point: points[k],
        gap,
    }
}

fn first_gap<T: Scalar>(ic: Interval<T>, images: &[Interval<T>]) -> Option<Interval<T>> {
    let mut sorted: Vec<Interval<T>> = images.iter().filter(|i| !i.is_empty()).copied().collect();
    sorted.sort_by(|a, b| a.lo.partial_cmp(&b.lo).unwrap_or(std::cmp::Ordering::Equal));
    let mut reach = ic.lo;
    for i in sorted {
        if i.lo > reach {
            return Some(Interval::new(reach, i.lo.min(ic.hi)));
        }
        reach = reach.max(i.hi);
        if reach >= ic.hi {
            return None;
        }
    }
    (reach < ic.hi).then(|| Interval::new(reach, ic.hi))
}

/// A `(u+1)`-disk given as an affine graph over `(w, v)` with `|w| <= h`
/// and `|v|_inf <= rho`:
/// `point(w, v) = base + (K_c w + K_u v, w + L.v, v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Strip<T> {
    pub base: ChartPoint<T>,
    pub rho: T,
    pub h: T,
    pub k_c: Vec<T>,
    /// `s x u`, row-major.
    pub k_u: Vec<T>,
    pub l: Vec<T>,
}

impl<T: Scalar> Strip<T> {
    /// Strip with zero tilt.
    pub fn flat(base: ChartPoint<T>, rho: T, h: T) -> Self {
        let (s, u) = (base.x.len(), base.z.len());
        Self {
            base,
            rho,
            h,
            k_c: vec![T::zero(); s],
            k_u: vec![T::zero(); s * u],
            l: vec![T::zero(); u],
        }
    }

    fn su(&self) -> (usize, usize) {
        (self.base.x.len(), self.base.z.len())
    }

    pub fn point(&self, w: T, v: &[T]) -> ChartPoint<T> {
        let (s, u) = self.su();
        let x = (0..s)
            .map(|i| {
                let row = &self.k_u[i * u..(i + 1) * u];
                self.base.x[i]
                    + self.k_c[i] * w
                    + row.iter().zip(v).fold(T::zero(), |a, (&k, &vj)| a + k * vj)
            })
            .collect();
        let y = self.base.y
            + w
            + self
                .l
                .iter()
                .zip(v)
                .fold(T::zero(), |a, (&k, &vj)| a + k * vj);
        let z = self.base.z.iter().zip(v).map(|(&b, &vj)| b + vj).collect();
        ChartPoint::new(self.base.chart, x, y, z)
    }

    fn k_u_norm(&self) -> T {
        let (s, u) = self.su();
        (0..s)
            .map(|i| {
                self.k_u[i * u..(i + 1) * u]
                    .iter()
                    .fold(T::zero(), |a, v| a + v.abs())
            })
            .fold(T::zero(), T::max)
    }

    /// Tilt of the tangent space from `E^c ⊕ E^u`.
    pub fn tilt_cu(&self) -> T {
        vec_sup(&self.k_c).max(self.k_u_norm())
    }

    /// Tilt of the core u-disc from `E^uu`.
    pub fn tilt_uu(&self) -> T {
        self.k_u_norm()
            .max(self.l.iter().fold(T::zero(), |a, v| a + v.abs()))
    }

    /// Tangent vectors in `(x, y, z)` coordinates.
    pub fn tangent_columns(&self) -> Vec<Vec<f64>> {
        let (s, u) = self.su();
        let mut cols = Vec::with_capacity(u + 1);
        let mut cw: Vec<f64> = self.k_c.iter().map(|v| v.as_f64()).collect();
        cw.push(1.0);
        cw.extend(std::iter::repeat_n(0.0, u));
        cols.push(cw);
        for j in 0..u {
            let mut c: Vec<f64> = (0..s).map(|i| self.k_u[i * u + j].as_f64()).collect();
            c.push(self.l[j].as_f64());
            c.extend((0..u).map(|r| if r == j { 1.0 } else { 0.0 }));
            cols.push(c);
        }
        cols
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub ok: bool,
    pub reasons: Vec<String>,
}

pub fn is_well_placed<T: Scalar>(region: &BlenderRegion<T>, strip: &Strip<T>) -> Placement {
    let mut reasons = Vec::new();
    let finite = strip
        .k_c
        .iter()
        .chain(&strip.k_u)
        .chain(&strip.l)
        .all(|v| v.is_finite());
    if !finite {
        reasons.push("non-finite slope".to_string());
    }
    if !region.region.contains(&strip.base) {
        reasons.push(format!(
            "core disc center {} is outside the region",
            strip.base
        ));
    }
    let need = region.strip_radius_ratio * region.radius();
    if !(strip.rho >= need) {
        reasons.push(format!(
            "u-radius {:e} below {:e} x region radius",
            strip.rho, region.strip_radius_ratio
        ));
    }
    if !(strip.h > T::zero()) {
        reasons.push("empty center extent".to_string());
    }
    if !(strip.tilt_cu() <= region.cones.alpha_cu) {
        reasons.push(format!(
            "cu-tilt {:e} exceeds {:e}",
            strip.tilt_cu(),
            region.cones.alpha_cu
        ));
    }
    if !(strip.tilt_uu() <= region.cones.alpha_uu) {
        reasons.push(format!(
            "uu-tilt {:e} exceeds {:e}",
            strip.tilt_uu(),
            region.cones.alpha_uu
        ));
    }
    Placement {
        ok: reasons.is_empty(),
        reasons,
    }
}

/// Local stable set of a periodic point in chart P: `z = z_p` and the center
/// either pinned (`y = y_p`, expanding center) or free in an interval
/// (contracting center).
#[derive(Debug, Clone, PartialEq)]
pub struct StableTarget<T> {
    pub y: Interval<T>,
    pub z: Vec<T>,
    pub label: String,
}

impl<T: Scalar> StableTarget<T> {
    /// `center_extent` is used only when the center contracts.
    pub fn from_record(rec: &PeriodicOrbitRecord<T>, center_extent: Interval<T>) -> Self {
        let y = if rec.center_eigenvalue().abs() > T::one() {
            Interval::point(rec.point.y)
        } else {
            center_extent
        };
        Self {
            y,
            z: rec.point.z.clone(),
            label: rec.label(),
        }
    }

    pub fn point(y: T, z: Vec<T>, label: impl Into<String>) -> Self {
        Self {
            y: Interval::point(y),
            z,
            label: label.into(),
        }
    }
}

/// Stable target of a homoclinically related partner with contracting
/// center. Its local stable set in the region is the leaf `X x I_c x {z_b}`,
/// which is checked to be forward invariant under the partner's return map.
pub fn partner_target<T: Scalar>(
    model: &UnfoldedCycle<T>,
    region: &BlenderRegion<T>,
    partner: &PeriodicOrbitRecord<T>,
) -> Result<StableTarget<T>, BlenderError> {
    if !(partner.center_eigenvalue().abs() < T::one()) {
        return Err(BlenderError::Precondition(format!(
            "{} has no contracting center",
            partner.label()
        )));
    }
    let leaf = AxisBox {
        z: partner
            .point
            .z
            .iter()
            .map(|&z| Interval::point(z))
            .collect(),
        ..region.region.clone()
    };
    let g = &partner.return_map.g;
    let img = g.image_box(&leaf)?;
    let inside = region
        .region
        .x
        .iter()
        .zip(&img.x)
        .all(|(o, i)| o.contains_interval(i))
        && region.center_interval.contains_interval(&img.y);
    if !inside {
        return Err(BlenderError::NoMarkov(format!(
            "{} does not map its stable leaf into itself: {img}",
            partner.label()
        )));
    }
    cylinder_through(model, &partner.return_map.itinerary(), &leaf)
        .map_err(|e| BlenderError::NoMarkov(format!("{}: {e}", partner.label())))?;
    Ok(StableTarget {
        y: region.center_interval,
        z: partner.point.z.clone(),
        label: partner.label(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntersectionWitness<T> {
    pub point: ChartPoint<T>,
    pub depth: usize,
    /// Branch indices, first applied first.
    pub word: Vec<usize>,
    /// Distance to the pulled-back stable leaf `F^-1(W^s_loc)`.
    pub distance: T,
    pub rank: usize,
    /// Widths of the nested center intervals `J_0 ⊇ J_1 ⊇ ...`.
    pub widths: Vec<T>,
    /// Smallest ratio `|J_k| / |J_{k+1}|`; infinite at depth 0.
    pub min_factor: T,
    /// The composed branch map `F` of the word.
    pub map: BlockAffineMap<T>,
}

pub fn strip_intersect_ws<T: Scalar>(
    region: &BlenderRegion<T>,
    cert: Option<&BlenderCertificate<T>>,
    strip: &Strip<T>,
    target: &StableTarget<T>,
    max_depth: usize,
) -> Result<IntersectionWitness<T>, BlenderError> {
    if !cert.is_some_and(BlenderCertificate::certified) {
        return Err(BlenderError::NoCovering);
    }
    let placement = is_well_placed(region, strip);
    if !placement.ok {
        return Err(BlenderError::NotWellPlaced(placement.reasons));
    }
    let dims = region.dims();
    let ic = region.center_interval;
    let inverses: Vec<BlockAffineMap<T>> = region
        .branches
        .iter()
        .map(|b| b.map.invert())
        .collect::<Result<_, _>>()?;
    let mut f = BlockAffineMap::identity(Chart::P, dims);
    let mut f_inv = BlockAffineMap::identity(Chart::P, dims);
    let mut j_int = ic;
    let mut widths = vec![ic.width()];
    let mut word = Vec::new();
    let mut min_factor = T::infinity();

    // v(F^-1) = F^-u(z_target) - z_c, and the strip's center range there
    let v_of = |finv: &BlockAffineMap<T>| -> Vec<T> {
        let pulled = vec_add(&finv.u.mul_vec(&target.z), &finv.bz);
        vec_sub(&pulled, &strip.base.z)
    };
    let range_of = |v: &[T]| {
        let shift = strip
            .l
            .iter()
            .zip(v)
            .fold(T::zero(), |a, (&k, &vj)| a + k * vj);
        Interval::new(
            strip.base.y + shift - strip.h,
            strip.base.y + shift + strip.h,
        )
    };

    for depth in 0..=max_depth {
        let v = v_of(&f_inv);
        let range = range_of(&v);
        let pulled_y = target.y.affine(f_inv.c, f_inv.by);
        if vec_sup(&v) <= strip.rho {
            if let Some(hit) = pulled_y.intersect(&range) {
                let y_star = if pulled_y.width() == T::zero() {
                    pulled_y.lo
                } else {
                    hit.mid()
                };
                let shift = strip
                    .l
                    .iter()
                    .zip(&v)
                    .fold(T::zero(), |a, (&k, &vj)| a + k * vj);
                let w = (y_star - strip.base.y - shift).max(-strip.h).min(strip.h);
                let point = strip.point(w, &v);
                let leaf_z = vec_add(&v, &strip.base.z);
                let dz = vec_sup(&vec_sub(&point.z, &leaf_z));
                let dy = if pulled_y.contains(point.y) {
                    T::zero()
                } else {
                    (point.y - pulled_y.lo)
                        .abs()
                        .min((point.y - pulled_y.hi).abs())
                };
                let mut cols = strip.tangent_columns();
                for i in 0..dims.s() {
                    let mut c = vec![0.0; dims.n()];
                    c[i] = 1.0;
                    cols.push(c);
                }
                if !target.y.width().is_zero() {
                    // the target leaf also spans the center
                    let mut c = vec![0.0; dims.n()];
                    c[dims.s()] = 1.0;
                    cols.push(c);
                }
                return Ok(IntersectionWitness {
                    point,
                    depth,
                    word,
                    distance: dy.max(dz),
                    rank: rank_of_columns(&cols, dims.n()),
                    widths,
                    min_factor,
                    map: f,
                });
            }
        }
        if depth == max_depth {
            let distance = range.intersect(&pulled_y).map_or_else(
                || (pulled_y.mid() - range.mid()).abs() - range.radius(),
                |_| T::zero(),
            );
            return Err(BlenderError::MaxDepth {
                depth,
                distance: distance.as_f64(),
            });
        }
        // pick the branch whose nested child keeps the longest crossing
        let mut best: Option<(usize, T, Interval<T>)> = None;
        for (i, inv) in inverses.iter().enumerate() {
            let next_inv = BlockAffineMap::compose(&f_inv, inv)?;
            let child = ic.affine(next_inv.c, next_inv.by);
            let Some(child) = child.intersect(&j_int) else {
                continue;
            };
            let next_range = range_of(&v_of(&next_inv));
            let score = child
                .intersect(&next_range)
                .map_or(T::neg_infinity(), |c| c.width());
            if best.as_ref().is_none_or(|b| score > b.1) {
                best = Some((i, score, child));
            }
        }
        let Some((i, score, child)) = best else {
            return Err(BlenderError::LostCrossing { depth });
        };
        if score == T::neg_infinity() {
            return Err(BlenderError::LostCrossing { depth });
        }
        let factor = j_int.width() / child.width();
        min_factor = min_factor.min(factor);
        j_int = child;
        widths.push(child.width());
        word.push(i);
        f = BlockAffineMap::compose(&region.branches[i].map, &f)?;
        f_inv = BlockAffineMap::compose(&f_inv, &inverses[i])?;
    }
    unreachable!("loop returns at max_depth")
}

/// Seeded random well-placed strip: base uniform in the region, tilt at most
/// `tilt` in both cones, u-radius between one and two times the required
/// one, and center half-extent in `[0.05, 0.5] |I_c|`.
pub fn random_strip<T: Scalar, R: Rng>(
    region: &BlenderRegion<T>,
    tilt: T,
    rng: &mut R,
) -> Strip<T> {
    let mut pick = |i: &Interval<T>| {
        let (lo, hi) = (i.lo.as_f64(), i.hi.as_f64());
        T::lit(if hi > lo {
            rng.random_range(lo..=hi)
        } else {
            lo
        })
    };
    let b = &region.region;
    let base = ChartPoint::new(
        Chart::P,
        b.x.iter().map(&mut pick).collect(),
        pick(&b.y),
        b.z.iter().map(&mut pick).collect(),
    );
    let (s, u) = (base.x.len(), base.z.len());
    let a = tilt.as_f64() / (u as f64);
    let mut slope = || T::lit(rng.random_range(-a..=a));
    let k_c = (0..s).map(|_| slope()).collect();
    let k_u = (0..s * u).map(|_| slope()).collect();
    let l = (0..u).map(|_| slope()).collect();
    let width = region.center_interval.width().as_f64();
    let h = T::lit(rng.random_range(0.05..=0.5) * width);
    let rho = region.strip_radius_ratio * region.radius() * T::lit(rng.random_range(1.0..=2.0));
    Strip {
        base,
        rho,
        h,
        k_c,
        k_u,
        l,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessReport<T> {
    pub samples: usize,
    pub delta: T,
    pub seed: u64,
    pub strips_per_sample: usize,
    pub passed: usize,
    pub base_margin: T,
    pub worst_margin: T,
    pub max_volume_defect: T,
    /// `(sample index, reason)`.
    pub failures: Vec<(usize, String)>,
}

impl<T: Scalar> RobustnessReport<T> {
    pub fn pass_fraction(&self) -> f64 {
        if self.samples == 0 {
            1.0
        } else {
            self.passed as f64 / self.samples as f64
        }
    }
}

/// Branch coefficients written around `p_ref`:
/// `R(p) = p_ref + L (p - p_ref) + d`, each entry of `L` and `d` scaled by
/// `1 + delta * U[-1, 1]`, then volume restored on the u-block.
pub fn perturb_branch<T: Scalar, R: Rng>(
    map: &BlockAffineMap<T>,
    p_ref: &ChartPoint<T>,
    delta: f64,
    rng: &mut R,
) -> BlockAffineMap<T> {
    let mut jitter = |v: T| {
        if delta == 0.0 {
            v
        } else {
            v * T::lit(1.0 + delta * rng.random_range(-1.0..=1.0))
        }
    };
    let image = map.apply_unchecked(p_ref);
    let d: Vec<T> = image
        .coords()
        .iter()
        .zip(p_ref.coords())
        .map(|(&a, b)| a - b)
        .collect();
    let mut out = map.clone();
    out.s.entries_mut().iter_mut().for_each(|e| *e = jitter(*e));
    out.c = jitter(out.c);
    out.u.entries_mut().iter_mut().for_each(|e| *e = jitter(*e));
    let d: Vec<T> = d.into_iter().map(&mut jitter).collect();
    let mut out = compensate_volume(&out);
    let (s, u) = (p_ref.x.len(), p_ref.z.len());
    let lx = out.s.mul_vec(&p_ref.x);
    let lz = out.u.mul_vec(&p_ref.z);
    out.bx = (0..s).map(|i| p_ref.x[i] + d[i] - lx[i]).collect();
    out.by = p_ref.y + d[s] - out.c * p_ref.y;
    out.bz = (0..u).map(|i| p_ref.z[i] + d[s + 1 + i] - lz[i]).collect();
    out
}

/// Re-verifies covering and a strip batch for `samples` perturbed copies of
/// the region's branches. The region box and `I_c` stay fixed.
pub fn robustness_test<T: Scalar>(
    region: &BlenderRegion<T>,
    delta: f64,
    samples: usize,
    seed: u64,
    strips_per_sample: usize,
    max_depth: usize,
) -> RobustnessReport<T> {
    let base_cert = verify_covering(region);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p_ref = region.region.center();
    let mut report = RobustnessReport {
        samples,
        delta: T::lit(delta),
        seed,
        strips_per_sample,
        passed: 0,
        base_margin: base_cert.margin,
        worst_margin: T::infinity(),
        max_volume_defect: T::zero(),
        failures: Vec::new(),
    };
    let tol = T::lit(1e-8);
    for sample in 0..samples {
        let mut perturbed = region.clone();
        for br in &mut perturbed.branches {
            br.map = perturb_branch(&br.map, &p_ref, delta, &mut rng);
            report.max_volume_defect = report.max_volume_defect.max(br.map.volume_defect());
        }
        let cert = verify_covering(&perturbed);
        report.worst_margin = report.worst_margin.min(cert.margin);
        if !cert.certified() {
            report
                .failures
                .push((sample, format!("covering margin {:e}", cert.margin)));
            continue;
        }
        let Some(fix) = perturbed.branches[0].map.fixed_point() else {
            report
                .failures
                .push((sample, "R1 lost its fixed point".into()));
            continue;
        };
        let target = StableTarget::point(fix.y, fix.z, "perturbed R1 fixed point");
        let mut failure = None;
        for k in 0..strips_per_sample {
            let strip = random_strip(&perturbed, T::lit(0.1), &mut rng);
            match strip_intersect_ws(&perturbed, Some(&cert), &strip, &target, max_depth) {
                Ok(w) if w.distance <= tol && w.rank == perturbed.dims().n() => {}
                Ok(w) => {
                    failure = Some(format!(
                        "strip {k}: distance {:e}, rank {}",
                        w.distance, w.rank
                    ));
                    break;
                }
                Err(e) => {
                    failure = Some(format!("strip {k}: {e}"));
                    break;
                }
            }
        }
        match failure {
            Some(f) => report.failures.push((sample, f)),
            None => report.passed += 1,
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims() -> SplittingDims {
        SplittingDims::new(1, 1).unwrap()
    }

    fn synthetic(b2: f64) -> BlenderRegion<f64> {
        BlenderRegion::synthetic(dims(), &[(1.5, 0.0), (1.5, b2)], Interval::new(0.0, 1.0))
    }

    #[test]
    fn synthetic_pair_margin_is_exactly_half() {
        let c = verify_covering(&synthetic(-0.5));
        assert!(c.certified());
        assert_eq!(c.margin, 0.5);
        assert_eq!(
            c.images,
            vec![Interval::new(0.0, 1.5), Interval::new(-0.5, 1.0)]
        );
        for b in &synthetic(-0.5).branches {
            assert_eq!(b.map.volume_defect(), 0.0);
        }
    }

    #[test]
    fn single_branch_cover_is_not_certified() {
        // [0,1] ⊆ [0,1.5] alone, the images do not overlap
        let c = verify_covering(&synthetic(-2.0));
        assert!(c.covered);
        assert_eq!(c.slacks, [-0.5, 2.0, 0.5]);
        assert_eq!(c.margin, -0.5);
        assert!(!c.certified());
    }

    #[test]
    fn gap_is_located() {
        let r = BlenderRegion::<f64>::synthetic(
            dims(),
            &[(1.5, 0.6), (1.5, -1.2)],
            Interval::new(0.0, 1.0),
        );
        let c = verify_covering(&r);
        assert!(!c.covered);
        let gap = c.gap.unwrap();
        // images [0.6, 2.1] and [-1.2, 0.3]
        assert!((gap.lo - 0.3).abs() < 1e-15 && (gap.hi - 0.6).abs() < 1e-15);
    }

    #[test]
    fn fixed_point_interval_is_trivially_covered() {
        let r = BlenderRegion::<f64>::synthetic(
            dims(),
            &[(1.5, -0.5), (1.5, -0.5)],
            Interval::point(1.0),
        );
        let c = verify_covering(&r);
        assert!(c.covered);
        assert_eq!(c.margin, 0.0);
    }

    #[test]
    fn placement_rules() {
        let r = synthetic(-0.5);
        let c = r.region.center();
        assert!(is_well_placed(&r, &Strip::flat(c.clone(), 100.0, 0.1)).ok);
        let small = Strip::flat(c.clone(), r.radius(), 0.1);
        assert!(!is_well_placed(&r, &small).ok);
        let mut tilted = Strip::flat(c, 100.0, 0.1);
        tilted.k_c[0] = 0.2;
        let p = is_well_placed(&r, &tilted);
        assert!(!p.ok && p.reasons[0].contains("cu-tilt"));
    }

    #[test]
    fn strip_through_fixed_point_hits_at_depth_zero() {
        let r = synthetic(-0.5);
        let cert = verify_covering(&r);
        let target = StableTarget::point(0.0, vec![0.0], "g1 fixed point");
        let s = Strip::flat(
            ChartPoint::new(Chart::P, vec![0.0], 0.1, vec![0.0]),
            100.0,
            0.2,
        );
        let w = strip_intersect_ws(&r, Some(&cert), &s, &target, 10).unwrap();
        assert_eq!(w.depth, 0);
        assert_eq!(w.rank, 3);
        assert_eq!(w.point.y, 0.0);
    }

    #[test]
    fn strip_needs_certificate_and_cones() {
        let r = synthetic(-0.5);
        let target = StableTarget::point(0.0, vec![0.0], "g1");
        let s = Strip::flat(r.region.center(), 100.0, 0.01);
        assert_eq!(
            strip_intersect_ws(&r, None, &s, &target, 10).unwrap_err(),
            BlenderError::NoCovering
        );
        let cert = verify_covering(&r);
        let mut bad = s.clone();
        bad.l[0] = 0.5;
        assert!(matches!(
            strip_intersect_ws(&r, Some(&cert), &bad, &target, 10),
            Err(BlenderError::NotWellPlaced(_))
        ));
    }

    #[test]
    fn synthetic_strips_converge_geometrically() {
        let r = synthetic(-0.5);
        let cert = verify_covering(&r);
        let target = StableTarget::point(0.0, vec![0.0], "g1");
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let s = random_strip(&r, 0.05, &mut rng);
            let w = strip_intersect_ws(&r, Some(&cert), &s, &target, 60).unwrap();
            assert!(w.distance <= 1e-12);
            assert!(w.min_factor >= 1.5 * (1.0 - 1e-12));
        }
    }

    #[test]
    fn zero_perturbation_reproduces_branches() {
        let r = synthetic(-0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = r.region.center();
        for b in &r.branches {
            assert!(perturb_branch(&b.map, &p, 0.0, &mut rng).max_abs_diff(&b.map) <= 1e-15);
        }
        let rep = robustness_test(&r, 0.0, 5, 1, 3, 60);
        assert_eq!(rep.pass_fraction(), 1.0);
        assert_eq!(rep.worst_margin, rep.base_margin);
    }

    #[test]
    fn huge_perturbation_reports_failures() {
        let r = synthetic(-0.5);
        let rep = robustness_test(&r, 0.9, 40, 3, 2, 60);
        assert!(rep.pass_fraction() < 1.0);
        assert!(!rep.failures.is_empty());
        assert!(rep.max_volume_defect <= 1e-12);
    }

    fn reference_blender() -> (
        UnfoldedCycle<f64>,
        PeriodicOrbitRecord<f64>,
        BlenderRegion<f64>,
    ) {
        use crate::cycle::SimpleCycle;
        use crate::periodic::{find_periodic, strong_homoclinic_certificate};
        let u = UnfoldedCycle::new(SimpleCycle::reference(), 3.0 * 2f64.powi(-9));
        let a = find_periodic(&u, 8, 9).unwrap();
        let b = find_periodic(&u, 9, 8).unwrap();
        let c = strong_homoclinic_certificate(&u, &a, &b, 1e-8, 200).unwrap();
        let r = build_blender(&u, &a, &c, &BlenderOptions::default()).unwrap();
        (u, a, r)
    }

    #[test]
    fn reference_region() {
        let (_, a, r) = reference_blender();
        assert_eq!(r.powers, (2, 1, 1));
        assert_eq!(r.center_interval, Interval::new(0.96875, 1.0));
        let cert = verify_covering(&r);
        assert!(cert.certified());
        assert_eq!(cert.margin, 0.03125);
        assert!(r.min_multiplier() >= 2.0);
        assert!(r.region.contains(&a.point));
        let target = StableTarget::from_record(&a, r.center_interval);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let s = random_strip(&r, 0.1, &mut rng);
            let w = strip_intersect_ws(&r, Some(&cert), &s, &target, 200).unwrap();
            assert!(w.distance <= 1e-8, "{}", w.distance);
            assert_eq!(w.rank, 3);
        }
    }

    #[test]
    fn reference_robustness_is_reproducible() {
        let (_, _, r) = reference_blender();
        let rep = robustness_test(&r, 1e-3, 20, 42, 4, 200);
        assert_eq!(rep.pass_fraction(), 1.0, "{:?}", rep.failures);
        assert!(rep.worst_margin >= rep.base_margin - 10.0 * 1e-3 * r.center_interval.width());
        assert!(rep.max_volume_defect <= 1e-12);
        assert_eq!(rep, robustness_test(&r, 1e-3, 20, 42, 4, 200));
    }

    #[test]
    fn partner_leaf_catches_the_same_strips() {
        use crate::periodic::find_periodic;
        let (u, a, r) = reference_blender();
        let b = find_periodic(&u, 9, 8).unwrap();
        let cert = verify_covering(&r);
        let tb = partner_target(&u, &r, &b).unwrap();
        let ta = StableTarget::from_record(&a, r.center_interval);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let s = random_strip(&r, 0.1, &mut rng);
            assert!(strip_intersect_ws(&r, Some(&cert), &s, &ta, 200).is_ok());
            let w = strip_intersect_ws(&r, Some(&cert), &s, &tb, 200).unwrap();
            assert!(w.distance <= 1e-8);
        }
        assert!(partner_target(&u, &r, &a).is_err());
    }
}
