//! Block-affine maps between chart copies of `R^s x R x R^u`.
//!
//! A map is stored as its three diagonal blocks `(S, c, U)` plus a
//! translation. The blocks are never assembled into a full matrix, so the
//! splitting is preserved by construction.

use std::fmt;

use thiserror::Error;

use crate::interval::{dot_enclosure, Interval};
use crate::linalg::{vec_sup, Mat};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Chart {
    P,
    Q,
}

impl fmt::Display for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Chart::P => "P",
            Chart::Q => "Q",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AffineError {
    #[error("need s >= 1 and u >= 1, got s = {s}, u = {u}")]
    TrivialBundle { s: usize, u: usize },
    #[error("chart mismatch: expected {expected}, got {found}")]
    ChartMismatch { expected: Chart, found: Chart },
    #[error("dimension mismatch: {what}")]
    Dimension { what: String },
    #[error("singular block: {0}")]
    Singular(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplittingDims {
    s: usize,
    u: usize,
}

impl SplittingDims {
    pub fn new(s: usize, u: usize) -> Result<Self, AffineError> {
        if s == 0 || u == 0 {
            return Err(AffineError::TrivialBundle { s, u });
        }
        Ok(Self { s, u })
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn u(&self) -> usize {
        self.u
    }

    /// Ambient dimension `s + 1 + u`.
    pub fn n(&self) -> usize {
        self.s + 1 + self.u
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChartPoint<T> {
    pub chart: Chart,
    pub x: Vec<T>,
    pub y: T,
    pub z: Vec<T>,
}

impl<T: Scalar> ChartPoint<T> {
    pub fn new(chart: Chart, x: Vec<T>, y: T, z: Vec<T>) -> Self {
        Self { chart, x, y, z }
    }

    pub fn origin(chart: Chart, dims: SplittingDims) -> Self {
        Self::new(
            chart,
            vec![T::zero(); dims.s()],
            T::zero(),
            vec![T::zero(); dims.u()],
        )
    }

    pub fn dims_match(&self, dims: SplittingDims) -> bool {
        self.x.len() == dims.s() && self.z.len() == dims.u()
    }

    /// Coordinates flattened in `(x, y, z)` order.
    pub fn coords(&self) -> Vec<T> {
        let mut v = self.x.clone();
        v.push(self.y);
        v.extend_from_slice(&self.z);
        v
    }

    /// Sup-norm distance; infinite across charts.
    pub fn dist(&self, other: &Self) -> T {
        if self.chart != other.chart {
            return T::infinity();
        }
        self.coords()
            .iter()
            .zip(other.coords())
            .fold(T::zero(), |acc, (&a, b)| acc.max((a - b).abs()))
    }
}

impl<T: Scalar> fmt::Display for ChartPoint<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[T]| {
            v.iter()
                .map(|a| format!("{a}"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        write!(
            f,
            "({}; {}; {})_{}",
            join(&self.x),
            self.y,
            join(&self.z),
            self.chart
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockAffineMap<T> {
    pub domain: Chart,
    pub codomain: Chart,
    pub s: Mat<T>,
    pub c: T,
    pub u: Mat<T>,
    pub bx: Vec<T>,
    pub by: T,
    pub bz: Vec<T>,
}

impl<T: Scalar> BlockAffineMap<T> {
    /// Checked constructor: dimensions consistent and every block invertible.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        domain: Chart,
        codomain: Chart,
        s: Mat<T>,
        c: T,
        u: Mat<T>,
        bx: Vec<T>,
        by: T,
        bz: Vec<T>,
    ) -> Result<Self, AffineError> {
        if s.dim() != bx.len() || u.dim() != bz.len() {
            return Err(AffineError::Dimension {
                what: format!(
                    "blocks {}x{} / {}x{} vs translation lengths {} / {}",
                    s.dim(),
                    s.dim(),
                    u.dim(),
                    u.dim(),
                    bx.len(),
                    bz.len()
                ),
            });
        }
        SplittingDims::new(s.dim(), u.dim())?;
        if c == T::zero() || !c.is_finite() {
            return Err(AffineError::Singular("center multiplier"));
        }
        if s.det() == T::zero() {
            return Err(AffineError::Singular("s-block"));
        }
        if u.det() == T::zero() {
            return Err(AffineError::Singular("u-block"));
        }
        Ok(Self {
            domain,
            codomain,
            s,
            c,
            u,
            bx,
            by,
            bz,
        })
    }

    /// Linear map with diagonal scalar blocks `s*I`, `c`, `u*I`.
    pub fn scalar_blocks(
        chart_from: Chart,
        chart_to: Chart,
        dims: SplittingDims,
        s: T,
        c: T,
        u: T,
    ) -> Self {
        Self {
            domain: chart_from,
            codomain: chart_to,
            s: Mat::scalar(dims.s(), s),
            c,
            u: Mat::scalar(dims.u(), u),
            bx: vec![T::zero(); dims.s()],
            by: T::zero(),
            bz: vec![T::zero(); dims.u()],
        }
    }

    pub fn identity(chart: Chart, dims: SplittingDims) -> Self {
        Self::scalar_blocks(chart, chart, dims, T::one(), T::one(), T::one())
    }

    /// Pure translation, used for the unfolding shift.
    pub fn translation(chart: Chart, bx: Vec<T>, by: T, bz: Vec<T>) -> Self {
        Self {
            domain: chart,
            codomain: chart,
            s: Mat::identity(bx.len()),
            c: T::one(),
            u: Mat::identity(bz.len()),
            bx,
            by,
            bz,
        }
    }

    pub fn with_translation(mut self, bx: Vec<T>, by: T, bz: Vec<T>) -> Self {
        self.bx = bx;
        self.by = by;
        self.bz = bz;
        self
    }

    pub fn dims(&self) -> SplittingDims {
        SplittingDims {
            s: self.s.dim(),
            u: self.u.dim(),
        }
    }

    pub fn apply(&self, p: &ChartPoint<T>) -> Result<ChartPoint<T>, AffineError> {
        if p.chart != self.domain {
            return Err(AffineError::ChartMismatch {
                expected: self.domain,
                found: p.chart,
            });
        }
        if !p.dims_match(self.dims()) {
            return Err(AffineError::Dimension {
                what: format!(
                    "point has ({}, {}) coordinates, map expects ({}, {})",
                    p.x.len(),
                    p.z.len(),
                    self.s.dim(),
                    self.u.dim()
                ),
            });
        }
        Ok(self.apply_unchecked(p))
    }

    pub(crate) fn apply_unchecked(&self, p: &ChartPoint<T>) -> ChartPoint<T> {
        let x = self
            .s
            .mul_vec(&p.x)
            .iter()
            .zip(&self.bx)
            .map(|(&a, &b)| a + b)
            .collect();
        let z = self
            .u
            .mul_vec(&p.z)
            .iter()
            .zip(&self.bz)
            .map(|(&a, &b)| a + b)
            .collect();
        ChartPoint::new(self.codomain, x, self.c * p.y + self.by, z)
    }

    pub fn apply_center(&self, y: T) -> T {
        self.c * y + self.by
    }

    /// `outer ∘ inner`.
    pub fn compose(outer: &Self, inner: &Self) -> Result<Self, AffineError> {
        if inner.codomain != outer.domain {
            return Err(AffineError::ChartMismatch {
                expected: outer.domain,
                found: inner.codomain,
            });
        }
        if inner.dims() != outer.dims() {
            return Err(AffineError::Dimension {
                what: "composing maps of different splittings".into(),
            });
        }
        let bx = outer
            .s
            .mul_vec(&inner.bx)
            .iter()
            .zip(&outer.bx)
            .map(|(&a, &b)| a + b)
            .collect();
        let bz = outer
            .u
            .mul_vec(&inner.bz)
            .iter()
            .zip(&outer.bz)
            .map(|(&a, &b)| a + b)
            .collect();
        Ok(Self {
            domain: inner.domain,
            codomain: outer.codomain,
            s: outer.s.matmul(&inner.s),
            c: outer.c * inner.c,
            u: outer.u.matmul(&inner.u),
            bx,
            by: outer.c * inner.by + outer.by,
            bz,
        })
    }

    /// `self^k` for a self-map, by repeated composition (left to right, so
    /// the center multiplier is the literal product `c * c * ... * c`).
    pub fn power(&self, k: usize) -> Result<Self, AffineError> {
        if self.domain != self.codomain {
            return Err(AffineError::ChartMismatch {
                expected: self.domain,
                found: self.codomain,
            });
        }
        let mut acc = Self::identity(self.domain, self.dims());
        for _ in 0..k {
            acc = Self::compose(self, &acc)?;
        }
        Ok(acc)
    }

    pub fn invert(&self) -> Result<Self, AffineError> {
        let si = self.s.inverse().ok_or(AffineError::Singular("s-block"))?;
        let ui = self.u.inverse().ok_or(AffineError::Singular("u-block"))?;
        if self.c == T::zero() {
            return Err(AffineError::Singular("center multiplier"));
        }
        let ci = T::one() / self.c;
        let bx = si.mul_vec(&self.bx).into_iter().map(|a| -a).collect();
        let bz = ui.mul_vec(&self.bz).into_iter().map(|a| -a).collect();
        Ok(Self {
            domain: self.codomain,
            codomain: self.domain,
            s: si,
            c: ci,
            u: ui,
            bx,
            by: -ci * self.by,
            bz,
        })
    }

    /// `| |det S * c * det U| - 1 |`.
    pub fn volume_defect(&self) -> T {
        ((self.s.det() * self.c * self.u.det()).abs() - T::one()).abs()
    }

    /// Largest entrywise difference over blocks and translation; infinite if
    /// the charts differ.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        if self.domain != other.domain
            || self.codomain != other.codomain
            || self.dims() != other.dims()
        {
            return T::infinity();
        }
        let bx: Vec<T> = self
            .bx
            .iter()
            .zip(&other.bx)
            .map(|(&a, &b)| a - b)
            .collect();
        let bz: Vec<T> = self
            .bz
            .iter()
            .zip(&other.bz)
            .map(|(&a, &b)| a - b)
            .collect();
        self.s
            .max_abs_diff(&other.s)
            .max(self.u.max_abs_diff(&other.u))
            .max((self.c - other.c).abs())
            .max((self.by - other.by).abs())
            .max(vec_sup(&bx))
            .max(vec_sup(&bz))
    }

    /// Rigorous enclosure of the image of a box.
    pub fn image_box(&self, b: &AxisBox<T>) -> Result<AxisBox<T>, AffineError> {
        if b.chart != self.domain {
            return Err(AffineError::ChartMismatch {
                expected: self.domain,
                found: b.chart,
            });
        }
        let block = |m: &Mat<T>, xs: &[Interval<T>], t: &[T]| -> Vec<Interval<T>> {
            (0..m.dim())
                .map(|i| {
                    let row = &m.entries()[i * m.dim()..(i + 1) * m.dim()];
                    dot_enclosure(row, xs).add(&Interval::point(t[i]))
                })
                .collect()
        };
        Ok(AxisBox {
            chart: self.codomain,
            x: block(&self.s, &b.x, &self.bx),
            y: b.y.affine(self.c, self.by),
            z: block(&self.u, &b.z, &self.bz),
        })
    }

    /// Fixed point of a self-map, solved block by block. `None` if some block
    /// has eigenvalue 1.
    pub fn fixed_point(&self) -> Option<ChartPoint<T>> {
        if self.domain != self.codomain || self.c == T::one() {
            return None;
        }
        let solve = |m: &Mat<T>, b: &[T]| -> Option<Vec<T>> {
            let mut a = Mat::identity(m.dim());
            for (e, &v) in a.entries_mut().iter_mut().zip(m.entries()) {
                *e = *e - v;
            }
            Some(a.inverse()?.mul_vec(b))
        };
        Some(ChartPoint::new(
            self.domain,
            solve(&self.s, &self.bx)?,
            self.by / (T::one() - self.c),
            solve(&self.u, &self.bz)?,
        ))
    }

    /// Converts the coefficients to another scalar type.
    pub fn cast<V: Scalar>(&self) -> BlockAffineMap<V> {
        let conv = |v: &[T]| v.iter().map(|a| V::lit(a.as_f64())).collect::<Vec<V>>();
        BlockAffineMap {
            domain: self.domain,
            codomain: self.codomain,
            s: Mat::from_row_major(conv(self.s.entries())).expect("square block"),
            c: V::lit(self.c.as_f64()),
            u: Mat::from_row_major(conv(self.u.entries())).expect("square block"),
            bx: conv(&self.bx),
            by: V::lit(self.by.as_f64()),
            bz: conv(&self.bz),
        }
    }
}

/// Axis-aligned box in one chart, stored per block.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisBox<T> {
    pub chart: Chart,
    pub x: Vec<Interval<T>>,
    pub y: Interval<T>,
    pub z: Vec<Interval<T>>,
}

impl<T: Scalar> AxisBox<T> {
    /// Sup-norm ball of radius `r` around `p`.
    pub fn around(p: &ChartPoint<T>, r: T) -> Self {
        Self::around_blocks(p, r, r, r)
    }

    /// Box with separate radii per block.
    pub fn around_blocks(p: &ChartPoint<T>, rx: T, ry: T, rz: T) -> Self {
        Self {
            chart: p.chart,
            x: p.x.iter().map(|&a| Interval::centered(a, rx)).collect(),
            y: Interval::centered(p.y, ry),
            z: p.z.iter().map(|&a| Interval::centered(a, rz)).collect(),
        }
    }

    /// `[lo, hi]` on every axis.
    pub fn cube(chart: Chart, dims: SplittingDims, lo: T, hi: T) -> Self {
        let i = Interval::new(lo, hi);
        Self {
            chart,
            x: vec![i; dims.s()],
            y: i,
            z: vec![i; dims.u()],
        }
    }

    pub fn point(p: &ChartPoint<T>) -> Self {
        Self::around(p, T::zero())
    }

    pub fn contains(&self, p: &ChartPoint<T>) -> bool {
        p.chart == self.chart
            && self.x.len() == p.x.len()
            && self.z.len() == p.z.len()
            && self.x.iter().zip(&p.x).all(|(i, &v)| i.contains(v))
            && self.y.contains(p.y)
            && self.z.iter().zip(&p.z).all(|(i, &v)| i.contains(v))
    }

    pub fn contains_box(&self, other: &Self) -> bool {
        self.chart == other.chart
            && self.x.len() == other.x.len()
            && self.z.len() == other.z.len()
            && self
                .x
                .iter()
                .zip(&other.x)
                .all(|(a, b)| a.contains_interval(b))
            && self.y.contains_interval(&other.y)
            && self
                .z
                .iter()
                .zip(&other.z)
                .all(|(a, b)| a.contains_interval(b))
    }

    pub fn center(&self) -> ChartPoint<T> {
        ChartPoint::new(
            self.chart,
            self.x.iter().map(Interval::mid).collect(),
            self.y.mid(),
            self.z.iter().map(Interval::mid).collect(),
        )
    }

    /// Largest half-width over all axes.
    pub fn radius(&self) -> T {
        self.axes().map(|i| i.radius()).fold(T::zero(), T::max)
    }

    /// Smallest slack by which `inner` sits inside `self`; negative if it
    /// sticks out.
    pub fn inner_slack(&self, inner: &Self) -> T {
        self.axes()
            .zip(inner.axes())
            .map(|(o, i)| (i.lo - o.lo).min(o.hi - i.hi))
            .fold(T::infinity(), T::min)
    }

    pub fn axes(&self) -> impl Iterator<Item = &Interval<T>> {
        self.x
            .iter()
            .chain(std::iter::once(&self.y))
            .chain(self.z.iter())
    }
}

impl<T: Scalar> fmt::Display for AxisBox<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.axes().map(|i| i.to_string()).collect();
        write!(f, "{}_{}", parts.join(" x "), self.chart)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims() -> SplittingDims {
        SplittingDims::new(1, 1).unwrap()
    }

    fn a_map() -> BlockAffineMap<f64> {
        BlockAffineMap::scalar_blocks(Chart::P, Chart::P, dims(), 0.25, 2.0, 2.0)
    }

    #[test]
    fn splitting_needs_both_bundles() {
        assert!(SplittingDims::new(0, 1).is_err());
        assert_eq!(SplittingDims::new(2, 3).unwrap().n(), 6);
    }

    #[test]
    fn apply_a_to_unit_point() {
        let p = ChartPoint::new(Chart::P, vec![1.0], 1.0, vec![1.0]);
        let q = a_map().apply(&p).unwrap();
        assert_eq!((q.x[0], q.y, q.z[0]), (0.25, 2.0, 2.0));
    }

    #[test]
    fn apply_rejects_wrong_chart_and_dims() {
        let p = ChartPoint::new(Chart::Q, vec![1.0], 1.0, vec![1.0]);
        assert!(matches!(
            a_map().apply(&p),
            Err(AffineError::ChartMismatch { .. })
        ));
        let p = ChartPoint::new(Chart::P, vec![1.0, 2.0], 1.0, vec![1.0]);
        assert!(matches!(
            a_map().apply(&p),
            Err(AffineError::Dimension { .. })
        ));
    }

    #[test]
    fn square_and_inverse_of_a() {
        let a2 = BlockAffineMap::compose(&a_map(), &a_map()).unwrap();
        assert_eq!((a2.s[(0, 0)], a2.c, a2.u[(0, 0)]), (0.0625, 4.0, 4.0));
        let ai = a_map().invert().unwrap();
        assert_eq!((ai.s[(0, 0)], ai.c, ai.u[(0, 0)]), (4.0, 0.5, 0.5));
        assert_eq!(a_map().power(3).unwrap().c, 8.0);
    }

    #[test]
    fn volume_defect_examples() {
        assert_eq!(
            BlockAffineMap::<f64>::identity(Chart::P, dims()).volume_defect(),
            0.0
        );
        assert_eq!(a_map().volume_defect(), 0.0);
        let m = BlockAffineMap::scalar_blocks(Chart::P, Chart::P, dims(), 0.5, 2.0, 2.0);
        assert_eq!(m.volume_defect(), 1.0);
    }

    #[test]
    fn constructor_rejects_singular_blocks() {
        let r = BlockAffineMap::new(
            Chart::P,
            Chart::P,
            Mat::scalar(1, 0.0),
            1.0,
            Mat::scalar(1, 1.0),
            vec![0.0],
            0.0,
            vec![0.0],
        );
        assert_eq!(r.unwrap_err(), AffineError::Singular("s-block"));
    }

    #[test]
    fn fixed_point_solves_blockwise() {
        let m = a_map().with_translation(vec![0.75], -1.0, vec![3.0]);
        let p = m.fixed_point().unwrap();
        assert!(m.apply(&p).unwrap().dist(&p) < 1e-15);
        assert_eq!((p.x[0], p.y, p.z[0]), (1.0, 1.0, -3.0));
    }

    #[test]
    fn image_box_encloses_image_points() {
        let m = a_map().with_translation(vec![0.1], 0.3, vec![-0.7]);
        let b = AxisBox::around(&ChartPoint::new(Chart::P, vec![0.2], 0.1, vec![0.3]), 0.05);
        let img = m.image_box(&b).unwrap();
        for &t in &[-0.05, 0.0, 0.05] {
            let p = ChartPoint::new(Chart::P, vec![0.2 + t], 0.1 + t, vec![0.3 + t]);
            assert!(img.contains(&m.apply(&p).unwrap()));
        }
    }
}
