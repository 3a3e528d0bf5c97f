//! The unfolding family `f_t` and conservative retuning of the center
//! multipliers.

use thiserror::Error;

use crate::affine::{AffineError, BlockAffineMap, Chart};
use crate::cycle::SimpleCycle;
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PerturbError {
    #[error("shift t = {t} moves T_in(V) out of U_P")]
    ShiftExitsChart { t: f64 },
    #[error("retune needs 0 < lambda0 < 1 < mu0, got lambda0 = {lambda0}, mu0 = {mu0}")]
    OutOfRange { lambda0: f64, mu0: f64 },
    #[error("volume compensation breaks the spectral ordering: {detail}")]
    GapBroken {
        detail: String,
        candidate: Box<SimpleCycle<f64>>,
    },
    #[error(transparent)]
    Affine(#[from] AffineError),
}

/// A simple cycle with `T_in` followed by the center translation `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnfoldedCycle<T> {
    pub base: SimpleCycle<T>,
    pub t: T,
    /// `base` with `T_in` replaced by `T_in,t`.
    pub model: SimpleCycle<T>,
}

impl<T: Scalar> UnfoldedCycle<T> {
    /// Unchecked unfolding (no chart containment test).
    pub fn new(base: SimpleCycle<T>, t: T) -> Self {
        let mut model = base.clone();
        model.t_in.by = model.t_in.by + t;
        Self { base, t, model }
    }

    pub fn mu0(&self) -> T {
        self.model.mu()
    }

    pub fn lambda0(&self) -> T {
        self.model.lambda()
    }
}

/// Shifts `W^u(q)` off `W^ss(p)` by `t` along the center of chart P.
pub fn shift_family<T: Scalar>(
    cycle: &SimpleCycle<T>,
    t: T,
) -> Result<UnfoldedCycle<T>, PerturbError> {
    let unfolded = UnfoldedCycle::new(cycle.clone(), t);
    let image = unfolded.model.t_in.image_box(&unfolded.model.v)?;
    if !unfolded.model.u_p.contains_box(&image) {
        return Err(PerturbError::ShiftExitsChart { t: t.as_f64() });
    }
    Ok(unfolded)
}

/// Rescales the u-block uniformly so that `|det S * c * det U| = 1`.
pub fn compensate_volume<T: Scalar>(map: &BlockAffineMap<T>) -> BlockAffineMap<T> {
    let det = (map.s.det() * map.c * map.u.det()).abs();
    if det == T::one() || det == T::zero() {
        return map.clone();
    }
    let k = det.powf(-T::one() / T::count(map.u.dim()));
    let mut out = map.clone();
    out.u = out.u.scale(k);
    out
}

/// Sets the center multipliers to `(lambda0, mu0)` and rescales the u-blocks
/// to keep every map conservative. No spectral checks.
pub fn retune_unchecked<T: Scalar>(cycle: &SimpleCycle<T>, lambda0: T, mu0: T) -> SimpleCycle<T> {
    let mut out = cycle.clone();
    let u = T::count(cycle.dims.u());
    let ka = (cycle.mu() / mu0).powf(T::one() / u);
    let kb = (cycle.lambda() / lambda0).powf(T::one() / u);
    if mu0 != cycle.mu() {
        out.a.c = mu0;
        out.a.u = cycle.a.u.scale(ka);
    }
    if lambda0 != cycle.lambda() {
        out.b.c = lambda0;
        out.b.u = cycle.b.u.scale(kb);
    }
    out
}

/// Checked retune: the compensated model must still satisfy the spectral
/// ordering, otherwise the candidate is returned inside the error.
pub fn retune_center<T: Scalar>(
    cycle: &SimpleCycle<T>,
    lambda0: T,
    mu0: T,
) -> Result<SimpleCycle<T>, PerturbError> {
    if !(lambda0 > T::zero() && lambda0 < T::one() && mu0 > T::one()) {
        return Err(PerturbError::OutOfRange {
            lambda0: lambda0.as_f64(),
            mu0: mu0.as_f64(),
        });
    }
    let out = retune_unchecked(cycle, lambda0, mu0);
    let report = out.validate();
    let broken: Vec<String> = report
        .failures()
        .filter(|c| c.name.starts_with("spectral") || c.name.starts_with("volume"))
        .map(|c| format!("{}: {}", c.name, c.detail))
        .collect();
    if !broken.is_empty() {
        return Err(PerturbError::GapBroken {
            detail: broken.join("; "),
            candidate: Box::new(cast_cycle(&out)),
        });
    }
    Ok(out)
}

/// Flat coefficient table of every map in the model, used to probe
/// continuity in the parameters.
pub fn coefficient_table<T: Scalar>(cycle: &SimpleCycle<T>) -> Vec<T> {
    let mut v = Vec::new();
    for (_, m) in cycle.named_maps() {
        v.extend_from_slice(m.s.entries());
        v.push(m.c);
        v.extend_from_slice(m.u.entries());
        v.extend_from_slice(&m.bx);
        v.push(m.by);
        v.extend_from_slice(&m.bz);
    }
    v
}

pub(crate) fn cast_cycle<T: Scalar>(c: &SimpleCycle<T>) -> SimpleCycle<f64> {
    let boxed = |b: &crate::affine::AxisBox<T>| {
        let iv = |i: &crate::interval::Interval<T>| {
            crate::interval::Interval::new(i.lo.as_f64(), i.hi.as_f64())
        };
        crate::affine::AxisBox {
            chart: b.chart,
            x: b.x.iter().map(iv).collect(),
            y: iv(&b.y),
            z: b.z.iter().map(iv).collect(),
        }
    };
    SimpleCycle {
        dims: c.dims,
        a: c.a.cast(),
        b: c.b.cast(),
        t_out: c.t_out.cast(),
        t_in: c.t_in.cast(),
        y_plus: c.y_plus.as_f64(),
        y_minus: c.y_minus.as_f64(),
        x0: c.x0.iter().map(|v| v.as_f64()).collect(),
        z0: c.z0.iter().map(|v| v.as_f64()).collect(),
        u_p: boxed(&c.u_p),
        u_q: boxed(&c.u_q),
        v: boxed(&c.v),
        w: boxed(&c.w),
        l: c.l,
        r: c.r,
        eps_seg: c.eps_seg.as_f64(),
    }
}

/// Translation by `t` along the center of chart P.
pub fn center_shift<T: Scalar>(cycle: &SimpleCycle<T>, t: T) -> BlockAffineMap<T> {
    BlockAffineMap::translation(
        Chart::P,
        vec![T::zero(); cycle.dims.s()],
        t,
        vec![T::zero(); cycle.dims.u()],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affine::ChartPoint;

    #[test]
    fn zero_shift_is_the_base_model() {
        let c = SimpleCycle::<f64>::reference();
        let u = shift_family(&c, 0.0).unwrap();
        assert_eq!(u.model, c);
    }

    #[test]
    fn shift_moves_heteroclinic_image() {
        let c = SimpleCycle::<f64>::reference();
        let u = shift_family(&c, 0.1).unwrap();
        let q = ChartPoint::new(Chart::Q, vec![0.0], 0.0, vec![1.0]);
        assert_eq!(
            u.model.t_in.apply(&q).unwrap(),
            ChartPoint::new(Chart::P, vec![1.0], 0.1, vec![0.0])
        );
        assert_eq!(u.model.t_in.volume_defect(), 0.0);
        // shifted T_in equals translation after the base map
        let composed = BlockAffineMap::compose(&center_shift(&c, 0.1), &c.t_in).unwrap();
        assert_eq!(composed, u.model.t_in);
    }

    #[test]
    fn large_shift_exits_chart() {
        let c = SimpleCycle::<f64>::reference();
        assert!(matches!(
            shift_family(&c, 1.9),
            Err(PerturbError::ShiftExitsChart { .. })
        ));
    }

    #[test]
    fn retune_identity_and_compensation() {
        let c = SimpleCycle::<f64>::reference();
        assert_eq!(retune_center(&c, 0.5, 2.0).unwrap(), c);
        match retune_center(&c, 0.5, 2.1) {
            Err(PerturbError::GapBroken { candidate, .. }) => {
                assert!((candidate.a.u[(0, 0)] - 2.0 * (2.0 / 2.1)).abs() < 1e-15);
                assert!(candidate.a.volume_defect() <= 1e-12);
            }
            other => panic!("expected a broken gap, got {other:?}"),
        }
        let r = retune_center(&c, 0.5, 1.99).unwrap();
        assert!(r.validate().passed());
        assert_eq!(r.mu(), 1.99);
        assert!(r.a.volume_defect() <= 1e-12);
    }

    #[test]
    fn compensation_restores_volume_in_higher_u() {
        let m = BlockAffineMap::new(
            Chart::P,
            Chart::P,
            crate::linalg::Mat::scalar(1, 0.3),
            1.7,
            crate::linalg::Mat::from_rows(&[vec![2.0, 0.5], vec![0.1, 3.0]]).unwrap(),
            vec![0.0],
            0.0,
            vec![0.0, 0.0],
        )
        .unwrap();
        assert!(compensate_volume(&m).volume_defect() <= 1e-12);
    }

    #[test]
    fn coefficients_move_continuously() {
        let c = SimpleCycle::<f64>::reference();
        let h = 1e-6;
        let base =
            coefficient_table(&UnfoldedCycle::new(retune_unchecked(&c, 0.5, 1.99), 0.01).model);
        for (dl, dm, dt) in [(h, 0.0, 0.0), (0.0, h, 0.0), (0.0, 0.0, h)] {
            let moved = coefficient_table(
                &UnfoldedCycle::new(retune_unchecked(&c, 0.5 + dl, 1.99 + dm), 0.01 + dt).model,
            );
            let jump = base
                .iter()
                .zip(&moved)
                .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()));
            assert!(jump <= 10.0 * h, "jump {jump}");
        }
    }
}
