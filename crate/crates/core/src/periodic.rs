//! Periodic points `p_{m,n}` of the single-pass itineraries, their Markov
//! cylinders, and strong homoclinic certificates between two of them.

use thiserror::Error;

use crate::affine::{AffineError, AxisBox, BlockAffineMap, Chart, ChartPoint};
use crate::center::{psi, psi_multiplier};
use crate::cycle::{CycleError, Itinerary};
use crate::interval::Interval;
use crate::linalg::{rank_of_columns, vec_sup};
use crate::perturbation::UnfoldedCycle;
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PeriodicError {
    #[error("psi^({m},{n})(y+) - y+ = {residual:e} exceeds the residual tolerance")]
    Hypothesis { m: usize, n: usize, residual: f64 },
    #[error("return map is not hyperbolic: s-radius {s_radius:e}, smallest u-singular value {u_floor:e}")]
    NotHyperbolic { s_radius: f64, u_floor: f64 },
    #[error("center fixed point {found:e} differs from y+ = {expected:e}")]
    CenterMismatch { found: f64, expected: f64 },
    #[error("Markov cylinder check failed: {0}")]
    Markov(String),
    #[error(
        "generating orbit escapes the chart domains ({m}, {n} too small for the boxes): {source}"
    )]
    Escape {
        m: usize,
        n: usize,
        #[source]
        source: CycleError,
    },
    #[error("precondition: {0}")]
    Precondition(String),
    #[error("slices do not meet inside the su-disc: {0}")]
    Extents(String),
    #[error("no convergence after {steps} steps: accumulation {accumulation:e}, residuals ({r_ss:e}, {r_uu:e})")]
    NoConvergence {
        steps: usize,
        accumulation: f64,
        r_ss: f64,
        r_uu: f64,
    },
    #[error(transparent)]
    Cycle(#[from] CycleError),
    #[error(transparent)]
    Affine(#[from] AffineError),
}

/// `G = A^n ∘ T_in,t ∘ B^m ∘ T_out` on chart P.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnMap<T> {
    pub g: BlockAffineMap<T>,
    pub m: usize,
    pub n: usize,
    pub t: T,
    /// `n + l + m + r`.
    pub period: usize,
    pub s_radius: f64,
    pub u_floor: f64,
}

impl<T: Scalar> ReturnMap<T> {
    pub fn itinerary(&self) -> Itinerary {
        Itinerary::cycle_pass(self.m, self.n)
    }

    pub fn hyperbolic(&self) -> bool {
        self.s_radius < 1.0 && self.u_floor > 1.0
    }
}

pub fn build_return_map<T: Scalar>(
    model: &UnfoldedCycle<T>,
    m: usize,
    n: usize,
) -> Result<ReturnMap<T>, PeriodicError> {
    if m == 0 || n == 0 {
        return Err(PeriodicError::Precondition(format!(
            "need m, n >= 1, got ({m}, {n})"
        )));
    }
    let g = model
        .model
        .compose_word(Chart::P, &Itinerary::cycle_pass(m, n))?;
    let expected = psi_multiplier(model, m, n);
    let slack = T::epsilon() * T::count(4 * (m + n + 2));
    if (g.c - expected).abs() > slack * expected.abs() {
        return Err(PeriodicError::Precondition(format!(
            "composed center multiplier {} differs from mu0^n lambda0^m = {}",
            g.c, expected
        )));
    }
    Ok(ReturnMap {
        s_radius: g.s.spectral_radius(),
        u_floor: g.u.min_singular_value(),
        g,
        m,
        n,
        t: model.t,
        period: n + model.base.l + m + model.base.r,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T> {
    /// Moduli of the s-block eigenvalues, ascending.
    pub stable: Vec<f64>,
    pub center: T,
    /// Moduli of the u-block eigenvalues, ascending.
    pub unstable: Vec<f64>,
}

impl<T: Scalar> Spectrum<T> {
    /// All moduli, ascending.
    pub fn sorted(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.stable.iter().chain(&self.unstable).copied().collect();
        v.push(self.center.abs().as_f64());
        v.sort_by(f64::total_cmp);
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicOrbitRecord<T> {
    pub point: ChartPoint<T>,
    pub return_map: ReturnMap<T>,
    pub spectrum: Spectrum<T>,
    /// `C^u = B_delta(G.bx) x {y+} x [-1,1]^u`.
    pub cyl_u: AxisBox<T>,
    /// `C^s = [-1,1]^s x {y+} x B_delta(zbar)`, `zbar` the z-preimage of 0.
    pub cyl_s: AxisBox<T>,
    pub delta: T,
    pub fixed_residual: T,
    /// Slack of `G^-1(C^u)` and `G(C^s)` inside the su-disc.
    pub markov_slack: (T, T),
}

impl<T: Scalar> PeriodicOrbitRecord<T> {
    pub fn center_eigenvalue(&self) -> T {
        self.spectrum.center
    }

    pub fn label(&self) -> String {
        format!("p_({},{})", self.return_map.m, self.return_map.n)
    }
}

/// Unit su-disc at height `y+`, with a center tolerance `tol`.
pub fn su_disc<T: Scalar>(model: &UnfoldedCycle<T>, tol: T) -> AxisBox<T> {
    let d = model.model.dims;
    let unit = Interval::new(-T::one(), T::one());
    AxisBox {
        chart: Chart::P,
        x: vec![unit; d.s()],
        y: Interval::centered(model.model.y_plus, tol),
        z: vec![unit; d.u()],
    }
}

pub fn find_periodic<T: Scalar>(
    model: &UnfoldedCycle<T>,
    m: usize,
    n: usize,
) -> Result<PeriodicOrbitRecord<T>, PeriodicError> {
    let yp = model.model.y_plus;
    let tol = T::residual_tol();
    let residual = psi(model, m, n, yp) - yp;
    if !(residual.abs() <= tol) {
        return Err(PeriodicError::Hypothesis {
            m,
            n,
            residual: residual.as_f64(),
        });
    }
    let rm = build_return_map(model, m, n)?;
    if !rm.hyperbolic() {
        return Err(PeriodicError::NotHyperbolic {
            s_radius: rm.s_radius,
            u_floor: rm.u_floor,
        });
    }
    let g = &rm.g;
    let fixed = g.fixed_point().ok_or(PeriodicError::Precondition(
        "neutral center multiplier".into(),
    ))?;
    if (fixed.y - yp).abs() > tol {
        return Err(PeriodicError::CenterMismatch {
            found: fixed.y.as_f64(),
            expected: yp.as_f64(),
        });
    }
    let point = ChartPoint::new(Chart::P, fixed.x, yp, fixed.z);
    let fixed_residual = g.apply(&point)?.dist(&point);

    let s_inv = g.s.inverse().ok_or(AffineError::Singular("s-block"))?;
    let delta = T::lit(0.5) * (T::one() / s_inv.inf_norm()).min(T::one() / g.u.inf_norm());
    let g_inv = g.invert()?;
    let zbar = g_inv
        .apply(&ChartPoint::new(
            Chart::P,
            vec![T::zero(); g.s.dim()],
            yp,
            vec![T::zero(); g.u.dim()],
        ))?
        .z;
    let unit = Interval::new(-T::one(), T::one());
    let cyl_u = AxisBox {
        chart: Chart::P,
        x: g.bx.iter().map(|&c| Interval::centered(c, delta)).collect(),
        y: Interval::point(yp),
        z: vec![unit; g.u.dim()],
    };
    let cyl_s = AxisBox {
        chart: Chart::P,
        x: vec![unit; g.s.dim()],
        y: Interval::point(yp),
        z: zbar.iter().map(|&c| Interval::centered(c, delta)).collect(),
    };
    let disc = su_disc(model, tol);
    let pre_u = g_inv.image_box(&cyl_u)?;
    let img_s = g.image_box(&cyl_s)?;
    let markov_slack = (disc.inner_slack(&pre_u), disc.inner_slack(&img_s));
    if !(markov_slack.0 > T::zero() && markov_slack.1 > T::zero()) {
        return Err(PeriodicError::Markov(format!(
            "G^-1(C^u) slack {:e}, G(C^s) slack {:e}",
            markov_slack.0, markov_slack.1
        )));
    }
    if !(cyl_u.contains(&point) && cyl_s.contains(&point)) {
        return Err(PeriodicError::Markov(format!(
            "{point} is not in C^u ∩ C^s (delta = {delta:e})"
        )));
    }

    model
        .model
        .orbit(&point, &rm.itinerary())
        .map_err(|source| PeriodicError::Escape { m, n, source })?;

    let spectrum = Spectrum {
        stable: g.s.eigen_moduli(),
        center: g.c,
        unstable: g.u.eigen_moduli(),
    };
    Ok(PeriodicOrbitRecord {
        point,
        return_map: rm,
        spectrum,
        cyl_u,
        cyl_s,
        delta,
        fixed_residual,
        markov_slack,
    })
}

/// `W^uu(a) ∩ W^ss(b)` and `W^uu(b) ∩ W^ss(a)` inside the plane `y = y+`.
pub fn homoclinic_relation<T: Scalar>(
    a: &PeriodicOrbitRecord<T>,
    b: &PeriodicOrbitRecord<T>,
) -> Result<(ChartPoint<T>, ChartPoint<T>), PeriodicError> {
    let sep = a.point.dist(&b.point);
    if !(sep > T::lit(1e-10)) {
        return Err(PeriodicError::Precondition(format!(
            "points coincide (separation {sep:e})"
        )));
    }
    if a.point.y != b.point.y {
        return Err(PeriodicError::Precondition(format!(
            "center coordinates differ: {} vs {}",
            a.point.y, b.point.y
        )));
    }
    let y = a.point.y;
    let ab = ChartPoint::new(Chart::P, a.point.x.clone(), y, b.point.z.clone());
    let ba = ChartPoint::new(Chart::P, b.point.x.clone(), y, a.point.z.clone());
    // each slice extends over the unit su-disc
    let unit = Interval::new(-T::one(), T::one());
    for (name, p) in [("W^uu(a) ∩ W^ss(b)", &ab), ("W^uu(b) ∩ W^ss(a)", &ba)] {
        if !p.x.iter().chain(&p.z).all(|&v| unit.contains(v)) {
            return Err(PeriodicError::Extents(format!(
                "{name} at {p} needs slices of radius {:e}",
                vec_sup(&p.coords())
            )));
        }
    }
    Ok((ab, ba))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrongHomoclinicCertificate<T> {
    pub owner: PeriodicOrbitRecord<T>,
    pub partner: PeriodicOrbitRecord<T>,
    pub cross_intersections: (ChartPoint<T>, ChartPoint<T>),
    pub shadow_point: ChartPoint<T>,
    /// `|z(G_a q) - z_a|` and `|x(G_b^-k q) - x_a|`.
    pub shadow_residuals: (T, T),
    pub steps: usize,
    /// `ln |S_b^k (x_a - x_b)|`.
    pub log_accumulation: f64,
    pub separation: T,
    pub quasi_rank: usize,
    pub n: usize,
}

impl<T: Scalar> StrongHomoclinicCertificate<T> {
    pub fn max_residual(&self) -> T {
        self.shadow_residuals.0.max(self.shadow_residuals.1)
    }
}

/// Finite-step surrogate of the inclination lemma. Starting on
/// `W^uu(a) ∩ W^ss(b)`, `k` iterates of `G_b` bring the point within `tol`
/// of `b`'s strong stable leaf through `x_b`; swapping its z-coordinate to
/// `z_a` gives a point `q` on `W^ss(a)` whose `G_b^-k` preimage lies on
/// `W^uu(a)`.
pub fn strong_homoclinic_certificate<T: Scalar>(
    model: &UnfoldedCycle<T>,
    a: &PeriodicOrbitRecord<T>,
    b: &PeriodicOrbitRecord<T>,
    tol: T,
    max_steps: usize,
) -> Result<StrongHomoclinicCertificate<T>, PeriodicError> {
    let cross = homoclinic_relation(a, b)?;
    let ga = &a.return_map.g;
    let gb = &b.return_map.g;
    let gb_inv = gb.invert()?;

    let mut d: Vec<T> = a
        .point
        .x
        .iter()
        .zip(&b.point.x)
        .map(|(&p, &q)| p - q)
        .collect();
    let mut log_acc = vec_sup(&d).as_f64().ln();
    let norm = vec_sup(&d);
    d.iter_mut().for_each(|v| *v = *v / norm);
    let log_tol = tol.as_f64().ln();

    let mut h = cross.0.clone();
    let mut steps = 0;
    while steps < max_steps && log_acc > log_tol {
        h = gb.apply(&h)?;
        d = gb.s.mul_vec(&d);
        let nrm = vec_sup(&d);
        if nrm == T::zero() {
            log_acc = f64::NEG_INFINITY;
        } else {
            log_acc += nrm.as_f64().ln();
            d.iter_mut().for_each(|v| *v = *v / nrm);
        }
        steps += 1;
    }

    let q = ChartPoint::new(Chart::P, h.x.clone(), a.point.y, a.point.z.clone());
    let r_ss = vec_sup(
        &ga.apply(&q)?
            .z
            .iter()
            .zip(&a.point.z)
            .map(|(&p, &w)| p - w)
            .collect::<Vec<_>>(),
    );
    let mut back = q.clone();
    for _ in 0..steps {
        back = gb_inv.apply(&back)?;
    }
    let r_uu = vec_sup(
        &back
            .x
            .iter()
            .zip(&a.point.x)
            .map(|(&p, &w)| p - w)
            .collect::<Vec<_>>(),
    );

    if log_acc > log_tol || !(r_ss <= tol && r_uu <= tol) {
        return Err(PeriodicError::NoConvergence {
            steps,
            accumulation: log_acc.exp(),
            r_ss: r_ss.as_f64(),
            r_uu: r_uu.as_f64(),
        });
    }
    let separation = q.dist(&a.point);
    if !(separation >= T::lit(100.0) * tol) {
        return Err(PeriodicError::Precondition(format!(
            "shadow point within {separation:e} of the owner, below 100 x tol"
        )));
    }

    let dims = model.model.dims;
    let n = dims.n();
    let mut cols = Vec::new();
    for j in 0..dims.s() {
        let mut v = vec![0.0; n];
        v[j] = 1.0;
        cols.push(v);
    }
    for j in 0..dims.u() {
        let mut v = vec![0.0; n];
        v[dims.s() + 1 + j] = 1.0;
        cols.push(v);
    }
    Ok(StrongHomoclinicCertificate {
        owner: a.clone(),
        partner: b.clone(),
        cross_intersections: cross,
        shadow_point: q,
        shadow_residuals: (r_ss, r_uu),
        steps,
        log_accumulation: log_acc,
        separation,
        quasi_rank: rank_of_columns(&cols, n),
        n,
    })
}
