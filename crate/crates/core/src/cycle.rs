//! The simple-cycle normal form: local linear maps at `p` (chart P) and `q`
//! (chart Q), the two transitions between them, and the boxes on which each
//! map is trusted.
//!
//! Transition naming: `T_out` leaves `p` along `W^u(p)` and lands near `q`
//! (P -> Q); `T_in` leaves `q` along `W^u(q)` and lands on `W^s(p)` (Q -> P).

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::affine::{AffineError, AxisBox, BlockAffineMap, Chart, ChartPoint, SplittingDims};
use crate::interval::Interval;
use crate::linalg::{rank_of_columns, Mat};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CycleError {
    #[error(transparent)]
    Affine(#[from] AffineError),
    #[error("itinerary step {step}: {symbol} expects chart {expected}, point is in chart {found}")]
    Inconsistent {
        step: usize,
        symbol: Symbol,
        expected: Chart,
        found: Chart,
    },
    #[error("domain escape at step {step}: {point} is outside {region} before applying {symbol}")]
    Escape {
        step: usize,
        symbol: Symbol,
        region: &'static str,
        point: String,
    },
    #[error("invalid model parameters: {0}")]
    Params(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Symbol {
    A,
    B,
    TOut,
    TIn,
}

impl Symbol {
    pub const ALL: [Symbol; 4] = [Symbol::A, Symbol::B, Symbol::TOut, Symbol::TIn];

    pub fn domain(self) -> Chart {
        match self {
            Symbol::A | Symbol::TOut => Chart::P,
            Symbol::B | Symbol::TIn => Chart::Q,
        }
    }

    pub fn codomain(self) -> Chart {
        match self {
            Symbol::A | Symbol::TIn => Chart::P,
            Symbol::B | Symbol::TOut => Chart::Q,
        }
    }

    /// Name of the box the point must lie in before this symbol acts.
    pub fn region_name(self) -> &'static str {
        match self {
            Symbol::A => "U_P",
            Symbol::B => "U_Q",
            Symbol::TOut => "W",
            Symbol::TIn => "V",
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Symbol::A => "A",
            Symbol::B => "B",
            Symbol::TOut => "T_out",
            Symbol::TIn => "T_in",
        })
    }
}

impl FromStr for Symbol {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "a" => Ok(Symbol::A),
            "b" => Ok(Symbol::B),
            "t_out" | "tout" => Ok(Symbol::TOut),
            "t_in" | "tin" => Ok(Symbol::TIn),
            other => Err(format!(
                "unknown symbol `{other}` (expected A, B, T_out, T_in)"
            )),
        }
    }
}

/// Finite word over `{A, B, T_out, T_in}`, applied left to right.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Itinerary(pub Vec<Symbol>);

impl Itinerary {
    /// The single-pass word `T_out, B^m, T_in, A^n`.
    pub fn cycle_pass(m: usize, n: usize) -> Self {
        let mut w = vec![Symbol::TOut];
        w.extend(std::iter::repeat_n(Symbol::B, m));
        w.push(Symbol::TIn);
        w.extend(std::iter::repeat_n(Symbol::A, n));
        Self(w)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Checks that consecutive symbols chain through matching charts
    /// starting from `start`.
    pub fn check_chain(&self, start: Chart) -> Result<(), CycleError> {
        let mut chart = start;
        for (step, &symbol) in self.0.iter().enumerate() {
            if symbol.domain() != chart {
                return Err(CycleError::Inconsistent {
                    step,
                    symbol,
                    expected: symbol.domain(),
                    found: chart,
                });
            }
            chart = symbol.codomain();
        }
        Ok(())
    }

    pub fn concat(&self, other: &Self) -> Self {
        Self(self.0.iter().chain(&other.0).copied().collect())
    }
}

impl fmt::Display for Itinerary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(Symbol::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

impl FromStr for Itinerary {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim().is_empty() {
            return Ok(Self::default());
        }
        s.split(',')
            .map(Symbol::from_str)
            .collect::<Result<_, _>>()
            .map(Self)
    }
}

/// Free parameters of a simple cycle. Translations of the transitions are
/// not free: they are fixed by the two heteroclinic incidences.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleParams<T> {
    pub dims: SplittingDims,
    pub a_s: Mat<T>,
    pub mu: T,
    pub a_u: Mat<T>,
    pub b_s: Mat<T>,
    pub lambda: T,
    pub b_u: Mat<T>,
    pub out_s: Mat<T>,
    pub out_c: T,
    pub out_u: Mat<T>,
    pub in_s: Mat<T>,
    pub in_c: T,
    pub in_u: Mat<T>,
    pub y_plus: T,
    pub y_minus: T,
    pub x0: Vec<T>,
    pub z0: Vec<T>,
    /// Half-width of the chart boxes `U_P`, `U_Q` (cubes about the origin).
    pub chart_radius: T,
    pub v_radius: T,
    pub w_radius: T,
    pub l: usize,
    pub r: usize,
    /// Half-length of the center segment `I` around `y+`.
    pub eps_seg: T,
}

impl<T: Scalar> CycleParams<T> {
    /// The reference model with `s = u = 1`.
    pub fn reference() -> Self {
        let dims = SplittingDims::new(1, 1).expect("non-trivial");
        let m = |v: f64| Mat::scalar(1, T::lit(v));
        Self {
            dims,
            a_s: m(0.25),
            mu: T::lit(2.0),
            a_u: m(2.0),
            b_s: m(0.5),
            lambda: T::lit(0.5),
            b_u: m(4.0),
            out_s: m(0.5),
            out_c: T::one(),
            out_u: m(2.0),
            in_s: m(0.25),
            in_c: T::one(),
            in_u: m(4.0),
            y_plus: T::one(),
            y_minus: -T::one(),
            x0: vec![T::one()],
            z0: vec![T::one()],
            chart_radius: T::lit(2.0),
            v_radius: T::lit(0.25),
            w_radius: T::lit(0.25),
            l: 1,
            r: 1,
            eps_seg: T::lit(0.1),
        }
    }

    pub fn build(&self) -> Result<SimpleCycle<T>, CycleError> {
        let d = self.dims;
        let check = |what: &str, m: &Mat<T>, want: usize| {
            if m.dim() == want {
                Ok(())
            } else {
                Err(CycleError::Params(format!(
                    "{what} is {0}x{0}, expected {want}x{want}",
                    m.dim()
                )))
            }
        };
        for (what, m) in [
            ("A.S", &self.a_s),
            ("B.S", &self.b_s),
            ("T_out.S", &self.out_s),
            ("T_in.S", &self.in_s),
        ] {
            check(what, m, d.s())?;
        }
        for (what, m) in [
            ("A.U", &self.a_u),
            ("B.U", &self.b_u),
            ("T_out.U", &self.out_u),
            ("T_in.U", &self.in_u),
        ] {
            check(what, m, d.u())?;
        }
        if self.x0.len() != d.s() || self.z0.len() != d.u() {
            return Err(CycleError::Params(format!(
                "x0 has length {} and z0 length {}, expected {} and {}",
                self.x0.len(),
                self.z0.len(),
                d.s(),
                d.u()
            )));
        }
        let zs = vec![T::zero(); d.s()];
        let zu = vec![T::zero(); d.u()];
        let a = BlockAffineMap::new(
            Chart::P,
            Chart::P,
            self.a_s.clone(),
            self.mu,
            self.a_u.clone(),
            zs.clone(),
            T::zero(),
            zu.clone(),
        )?;
        let b = BlockAffineMap::new(
            Chart::Q,
            Chart::Q,
            self.b_s.clone(),
            self.lambda,
            self.b_u.clone(),
            zs.clone(),
            T::zero(),
            zu.clone(),
        )?;
        // T_out(0, y+, 0)_P = (0, y-, 0)_Q
        let t_out = BlockAffineMap::new(
            Chart::P,
            Chart::Q,
            self.out_s.clone(),
            self.out_c,
            self.out_u.clone(),
            zs.clone(),
            self.y_minus - self.out_c * self.y_plus,
            zu,
        )?;
        // T_in(0, 0, z0)_Q = (x0, 0, 0)_P
        let bz: Vec<T> = self
            .in_u
            .mul_vec(&self.z0)
            .into_iter()
            .map(|v| -v)
            .collect();
        let t_in = BlockAffineMap::new(
            Chart::Q,
            Chart::P,
            self.in_s.clone(),
            self.in_c,
            self.in_u.clone(),
            self.x0.clone(),
            T::zero(),
            bz,
        )?;

        let r = self.chart_radius;
        let het_q = ChartPoint::new(Chart::Q, vec![T::zero(); d.s()], T::zero(), self.z0.clone());
        let het_p = ChartPoint::new(
            Chart::P,
            vec![T::zero(); d.s()],
            self.y_plus,
            vec![T::zero(); d.u()],
        );
        Ok(SimpleCycle {
            dims: d,
            a,
            b,
            t_out,
            t_in,
            y_plus: self.y_plus,
            y_minus: self.y_minus,
            x0: self.x0.clone(),
            z0: self.z0.clone(),
            u_p: AxisBox::cube(Chart::P, d, -r, r),
            u_q: AxisBox::cube(Chart::Q, d, -r, r),
            v: AxisBox::around(&het_q, self.v_radius),
            w: AxisBox::around(&het_p, self.w_radius),
            l: self.l,
            r: self.r,
            eps_seg: self.eps_seg,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimpleCycle<T> {
    pub dims: SplittingDims,
    pub a: BlockAffineMap<T>,
    pub b: BlockAffineMap<T>,
    pub t_out: BlockAffineMap<T>,
    pub t_in: BlockAffineMap<T>,
    pub y_plus: T,
    pub y_minus: T,
    pub x0: Vec<T>,
    pub z0: Vec<T>,
    pub u_p: AxisBox<T>,
    pub u_q: AxisBox<T>,
    pub v: AxisBox<T>,
    pub w: AxisBox<T>,
    pub l: usize,
    pub r: usize,
    pub eps_seg: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    /// `min(min|eig A.U| - mu, lambda - max|eig B.S|)`; zero when the
    /// ordering holds with equality.
    pub strict_gap: f64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "[{}] {}: {}",
                if c.passed { "pass" } else { "FAIL" },
                c.name,
                c.detail
            )?;
        }
        write!(f, "strict spectral gap: {:e}", self.strict_gap)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SliceKind {
    StrongStableP,
    StrongUnstableP,
    CenterP,
    StableP,
    UnstableP,
    StrongStableQ,
    StrongUnstableQ,
    CenterQ,
    StableQ,
    UnstableQ,
}

/// Coordinate-aligned affine slice through the chart origin.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldSlice<T> {
    pub base: ChartPoint<T>,
    pub ss: bool,
    pub center: bool,
    pub uu: bool,
    pub extent: AxisBox<T>,
}

impl<T: Scalar> ManifoldSlice<T> {
    pub fn dim(&self, dims: SplittingDims) -> usize {
        usize::from(self.center)
            + if self.ss { dims.s() } else { 0 }
            + if self.uu { dims.u() } else { 0 }
    }

    pub fn contains(&self, p: &ChartPoint<T>) -> bool {
        if !self.extent.contains(p) {
            return false;
        }
        let fixed = |free: bool, a: &[T], b: &[T]| free || a.iter().zip(b).all(|(x, y)| x == y);
        fixed(self.ss, &p.x, &self.base.x)
            && (self.center || p.y == self.base.y)
            && fixed(self.uu, &p.z, &self.base.z)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuasiTransverseReport {
    /// Rank of `T(W^s(p)) + T(T_in W^u(q))` at the heteroclinic point.
    pub quasi_rank: usize,
    /// Sum of the two tangent dimensions; equal to `quasi_rank` iff the
    /// tangent spaces meet trivially.
    pub quasi_dims: usize,
    /// Rank of `T(W^u(p)) + T(T_out^-1 W^s(q))` at `(0, y+, 0)_P`.
    pub transverse_rank: usize,
    pub n: usize,
}

impl QuasiTransverseReport {
    pub fn quasi_transverse(&self) -> bool {
        self.quasi_rank == self.quasi_dims && self.quasi_rank == self.n - 1
    }

    pub fn transverse(&self) -> bool {
        self.transverse_rank == self.n
    }

    pub fn passed(&self) -> bool {
        self.quasi_transverse() && self.transverse()
    }
}

impl<T: Scalar> SimpleCycle<T> {
    pub fn reference() -> Self {
        CycleParams::reference()
            .build()
            .expect("reference model builds")
    }

    pub fn map(&self, s: Symbol) -> &BlockAffineMap<T> {
        match s {
            Symbol::A => &self.a,
            Symbol::B => &self.b,
            Symbol::TOut => &self.t_out,
            Symbol::TIn => &self.t_in,
        }
    }

    pub fn region(&self, s: Symbol) -> &AxisBox<T> {
        match s {
            Symbol::A => &self.u_p,
            Symbol::B => &self.u_q,
            Symbol::TOut => &self.w,
            Symbol::TIn => &self.v,
        }
    }

    pub fn mu(&self) -> T {
        self.a.c
    }

    pub fn lambda(&self) -> T {
        self.b.c
    }

    /// `y- - y+`.
    pub fn delta_y(&self) -> T {
        self.y_minus - self.y_plus
    }

    /// The four model maps with their names, for audits.
    pub fn named_maps(&self) -> [(&'static str, &BlockAffineMap<T>); 4] {
        [
            ("A", &self.a),
            ("B", &self.b),
            ("T_out", &self.t_out),
            ("T_in", &self.t_in),
        ]
    }

    pub fn validate(&self) -> ValidationReport {
        let tol = T::audit_tol();
        let mut checks = Vec::new();
        let mut push = |name, passed, detail: String| {
            checks.push(Check {
                name,
                passed,
                detail,
            })
        };
        let fmt_list = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x:e}"))
                .collect::<Vec<_>>()
                .join(", ")
        };

        let charts_ok = self.a.domain == Chart::P
            && self.a.codomain == Chart::P
            && self.b.domain == Chart::Q
            && self.b.codomain == Chart::Q
            && self.t_out.domain == Chart::P
            && self.t_out.codomain == Chart::Q
            && self.t_in.domain == Chart::Q
            && self.t_in.codomain == Chart::P;
        push(
            "chart wiring",
            charts_ok,
            "A: P->P, B: Q->Q, T_out: P->Q, T_in: Q->P".into(),
        );

        let mu = self.mu().as_f64();
        let lambda = self.lambda().as_f64();
        let a_s = self.a.s.eigen_moduli();
        let a_u = self.a.u.eigen_moduli();
        let b_s = self.b.s.eigen_moduli();
        let b_u = self.b.u.eigen_moduli();
        let a_s_max = a_s.last().copied().unwrap_or(0.0);
        let a_u_min = a_u.first().copied().unwrap_or(f64::INFINITY);
        let b_s_max = b_s.last().copied().unwrap_or(0.0);
        let b_u_min = b_u.first().copied().unwrap_or(f64::INFINITY);
        push(
            "spectral ordering at p",
            a_s_max < 1.0 && 1.0 < mu && mu <= a_u_min,
            format!(
                "|eig A.S| = [{}] < 1 < mu = {mu:e} <= |eig A.U| = [{}]",
                fmt_list(&a_s),
                fmt_list(&a_u)
            ),
        );
        push(
            "spectral ordering at q",
            b_s_max <= lambda && 0.0 < lambda && lambda < 1.0 && b_u_min > 1.0,
            format!(
                "|eig B.S| = [{}] <= lambda = {lambda:e} < 1 < |eig B.U| = [{}]",
                fmt_list(&b_s),
                fmt_list(&b_u)
            ),
        );
        let u = self.dims.u();
        let index_p = a_u.iter().filter(|&&m| m > 1.0).count() + usize::from(mu > 1.0);
        let index_q = b_u.iter().filter(|&&m| m > 1.0).count() + usize::from(lambda > 1.0);
        push(
            "index bookkeeping",
            index_p == u + 1 && index_q == u,
            format!(
                "index(p) = {index_p} (want {}), index(q) = {index_q} (want {u})",
                u + 1
            ),
        );
        push(
            "heteroclinic data signs",
            self.y_plus > T::zero() && self.y_minus < T::zero(),
            format!("y+ = {}, y- = {}", self.y_plus, self.y_minus),
        );

        let het_p = ChartPoint::new(
            Chart::P,
            vec![T::zero(); self.dims.s()],
            self.y_plus,
            vec![T::zero(); u],
        );
        let het_p_img = ChartPoint::new(
            Chart::Q,
            vec![T::zero(); self.dims.s()],
            self.y_minus,
            vec![T::zero(); u],
        );
        let d_out = self
            .t_out
            .apply(&het_p)
            .map(|q| q.dist(&het_p_img))
            .unwrap_or(T::infinity());
        push(
            "T_out(0, y+, 0) = (0, y-, 0)",
            d_out <= tol,
            format!("error {d_out:e}"),
        );
        let iso_out = (self.t_out.c.abs() - T::one()).abs();
        push(
            "T_out center isometry",
            iso_out <= tol,
            format!("c = {}", self.t_out.c),
        );

        let het_q = ChartPoint::new(
            Chart::Q,
            vec![T::zero(); self.dims.s()],
            T::zero(),
            self.z0.clone(),
        );
        let het_q_img = ChartPoint::new(Chart::P, self.x0.clone(), T::zero(), vec![T::zero(); u]);
        let d_in = self
            .t_in
            .apply(&het_q)
            .map(|q| q.dist(&het_q_img))
            .unwrap_or(T::infinity());
        push(
            "T_in(0, 0, z0) = (x0, 0, 0)",
            d_in <= tol,
            format!("error {d_in:e}"),
        );
        let iso_in = (self.t_in.c.abs() - T::one()).abs();
        push(
            "T_in center isometry",
            iso_in <= tol,
            format!("c = {}", self.t_in.c),
        );

        for (name, m) in self.named_maps() {
            let d = m.volume_defect();
            let label = match name {
                "A" => "volume defect A",
                "B" => "volume defect B",
                "T_out" => "volume defect T_out",
                _ => "volume defect T_in",
            };
            push(label, d <= tol, format!("{d:e}"));
        }

        push(
            "V in U_Q",
            self.u_q.contains_box(&self.v),
            format!("V = {}", self.v),
        );
        push(
            "W in U_P",
            self.u_p.contains_box(&self.w),
            format!("W = {}", self.w),
        );
        let tv = self
            .t_in
            .image_box(&self.v)
            .map(|b| self.u_p.contains_box(&b))
            .unwrap_or(false);
        push("T_in(V) in U_P", tv, String::new());
        let tw = self
            .t_out
            .image_box(&self.w)
            .map(|b| self.u_q.contains_box(&b))
            .unwrap_or(false);
        push("T_out(W) in U_Q", tw, String::new());
        let seg = Interval::centered(self.y_plus, self.eps_seg);
        push(
            "segment I in W",
            self.w.y.contains_interval(&seg),
            format!("I = {seg}"),
        );
        let disc = AxisBox::cube(Chart::P, self.dims, -T::one(), T::one());
        let disc_ok = self
            .u_p
            .x
            .iter()
            .chain(&self.u_p.z)
            .zip(disc.x.iter().chain(&disc.z))
            .all(|(a, b)| a.contains_interval(b));
        push(
            "unit su-disc in U_P",
            disc_ok,
            format!("U_P = {}", self.u_p),
        );

        let strict_gap = (a_u_min - mu).min(lambda - b_s_max);
        ValidationReport { checks, strict_gap }
    }

    /// Orbit with domain checks: before each symbol the point must lie in
    /// that symbol's box. Returns the start followed by every image.
    pub fn orbit(
        &self,
        start: &ChartPoint<T>,
        itin: &Itinerary,
    ) -> Result<Vec<ChartPoint<T>>, CycleError> {
        itin.check_chain(start.chart)?;
        let mut out = Vec::with_capacity(itin.len() + 1);
        out.push(start.clone());
        let mut p = start.clone();
        for (step, &symbol) in itin.0.iter().enumerate() {
            if !self.region(symbol).contains(&p) {
                return Err(CycleError::Escape {
                    step,
                    symbol,
                    region: symbol.region_name(),
                    point: p.to_string(),
                });
            }
            p = self.map(symbol).apply(&p)?;
            out.push(p.clone());
        }
        Ok(out)
    }

    /// Orbit without domain checks.
    pub fn trace(
        &self,
        start: &ChartPoint<T>,
        itin: &Itinerary,
    ) -> Result<Vec<ChartPoint<T>>, CycleError> {
        itin.check_chain(start.chart)?;
        let mut out = vec![start.clone()];
        for &symbol in &itin.0 {
            let next = self.map(symbol).apply(out.last().expect("non-empty"))?;
            out.push(next);
        }
        Ok(out)
    }

    /// Single map equal to applying the word left to right. `start` is the
    /// chart of the first domain (needed for the empty word).
    pub fn compose_word(
        &self,
        start: Chart,
        itin: &Itinerary,
    ) -> Result<BlockAffineMap<T>, CycleError> {
        itin.check_chain(start)?;
        let mut acc = BlockAffineMap::identity(start, self.dims);
        for &symbol in &itin.0 {
            acc = BlockAffineMap::compose(self.map(symbol), &acc)?;
        }
        Ok(acc)
    }

    pub fn manifold_slice(&self, which: SliceKind) -> ManifoldSlice<T> {
        use SliceKind::*;
        let (chart, ss, center, uu) = match which {
            StrongStableP => (Chart::P, true, false, false),
            StrongUnstableP => (Chart::P, false, false, true),
            CenterP => (Chart::P, false, true, false),
            StableP => (Chart::P, true, false, false),
            UnstableP => (Chart::P, false, true, true),
            StrongStableQ => (Chart::Q, true, false, false),
            StrongUnstableQ => (Chart::Q, false, false, true),
            CenterQ => (Chart::Q, false, true, false),
            StableQ => (Chart::Q, true, true, false),
            UnstableQ => (Chart::Q, false, false, true),
        };
        let base = ChartPoint::origin(chart, self.dims);
        let chart_box = if chart == Chart::P {
            &self.u_p
        } else {
            &self.u_q
        };
        let pin = |free: bool, i: &Interval<T>| if free { *i } else { Interval::point(T::zero()) };
        let extent = AxisBox {
            chart,
            x: chart_box.x.iter().map(|i| pin(ss, i)).collect(),
            y: pin(center, &chart_box.y),
            z: chart_box.z.iter().map(|i| pin(uu, i)).collect(),
        };
        ManifoldSlice {
            base,
            ss,
            center,
            uu,
            extent,
        }
    }

    pub fn quasi_transverse_check(&self) -> QuasiTransverseReport {
        let (s, u) = (self.dims.s(), self.dims.u());
        let n = self.dims.n();
        let unit = |k: usize| {
            let mut v = vec![0.0; n];
            v[k] = 1.0;
            v
        };
        // block columns of a linear map written in (x, y, z) coordinates
        let s_col = |m: &BlockAffineMap<T>, j: usize| {
            let mut v = vec![0.0; n];
            for (i, vi) in v.iter_mut().take(s).enumerate() {
                *vi = m.s[(i, j)].as_f64();
            }
            v
        };
        let u_col = |m: &BlockAffineMap<T>, j: usize| {
            let mut v = vec![0.0; n];
            for i in 0..u {
                v[s + 1 + i] = m.u[(i, j)].as_f64();
            }
            v
        };
        let mut quasi: Vec<Vec<f64>> = (0..s).map(unit).collect();
        quasi.extend((0..u).map(|j| u_col(&self.t_in, j)));
        let quasi_rank = rank_of_columns(&quasi, n);

        let mut trans: Vec<Vec<f64>> = (0..u).map(|j| unit(s + 1 + j)).collect();
        trans.push(unit(s));
        if let Ok(inv) = self.t_out.invert() {
            trans.extend((0..s).map(|j| s_col(&inv, j)));
            let mut c = vec![0.0; n];
            c[s] = inv.c.as_f64();
            trans.push(c);
        }
        let transverse_rank = rank_of_columns(&trans, n);
        QuasiTransverseReport {
            quasi_rank,
            quasi_dims: s + u,
            transverse_rank,
            n,
        }
    }
}
