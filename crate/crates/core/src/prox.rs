//! Closed-form proximity operators and projections.
//!
//! Each map has an allocating form and an `_inplace` form used by the solver.
//! `prox_conjugate` turns any of them into the proximity operator of the
//! convex conjugate via the Moreau decomposition.

use crate::error::{Error, Result};
use crate::operators::norm2;

/// Grouping for the mixed ℓ1,2 norm.
///
/// Group `g` consists of the components `g + j * stride` for
/// `j = 0..group_size`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupLayout {
    pub n_groups: usize,
    pub group_size: usize,
    pub stride: usize,
}

impl GroupLayout {
    pub fn new(n_groups: usize, group_size: usize, stride: usize) -> Result<Self> {
        if n_groups == 0 || group_size == 0 {
            return Err(Error::param(
                "group layout needs at least one group of one component",
            ));
        }
        if group_size > 1 && stride < n_groups {
            return Err(Error::param(format!(
                "stride {stride} would make groups overlap ({n_groups} groups)"
            )));
        }
        Ok(Self {
            n_groups,
            group_size,
            stride,
        })
    }

    /// `group_size` blocks of `block_len` stacked back to back; component `i`
    /// of every block forms one group.
    pub fn blocks(block_len: usize, group_size: usize) -> Result<Self> {
        Self::new(block_len, group_size, block_len)
    }

    pub fn check(&self, len: usize) -> Result<()> {
        let covered = self.n_groups * self.group_size;
        let reach = self.stride * (self.group_size - 1) + self.n_groups;
        if covered != len || reach > len {
            return Err(Error::dim(format!(
                "group layout ({} groups of {} with stride {}) does not tile a vector of length {len}",
                self.n_groups, self.group_size, self.stride
            )));
        }
        Ok(())
    }

    #[inline]
    fn members(&self, g: usize) -> impl Iterator<Item = usize> {
        let stride = self.stride;
        (0..self.group_size).map(move |j| g + j * stride)
    }

    /// Euclidean norm of each group, in group order.
    pub fn group_norms<'a>(&'a self, x: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
        (0..self.n_groups).map(move |g| self.members(g).map(|i| x[i] * x[i]).sum::<f64>().sqrt())
    }
}

fn positive(name: &str, gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!(
            "{name} must be positive and finite, got {gamma}"
        )))
    }
}

/// Projection onto `[lo, hi]^n`; the step `gamma` has no effect.
pub fn prox_box(x: &[f64], lo: f64, hi: f64, gamma: f64) -> Result<Vec<f64>> {
    let mut out = x.to_vec();
    prox_box_inplace(&mut out, lo, hi, gamma)?;
    Ok(out)
}

pub fn prox_box_inplace(x: &mut [f64], lo: f64, hi: f64, gamma: f64) -> Result<()> {
    if !(lo < hi) {
        return Err(Error::param(format!(
            "box bounds need lo < hi, got [{lo}, {hi}]"
        )));
    }
    positive("gamma", gamma)?;
    x.iter_mut().for_each(|v| *v = v.max(lo).min(hi));
    Ok(())
}

/// Soft thresholding, the proximity operator of `gamma * ||.||_1`.
pub fn prox_l1(x: &[f64], gamma: f64) -> Result<Vec<f64>> {
    let mut out = x.to_vec();
    prox_l1_inplace(&mut out, gamma)?;
    Ok(out)
}

pub fn prox_l1_inplace(x: &mut [f64], gamma: f64) -> Result<()> {
    positive("gamma", gamma)?;
    x.iter_mut()
        .for_each(|v| *v = v.signum() * (v.abs() - gamma).max(0.0));
    Ok(())
}

/// Group soft thresholding, the proximity operator of `gamma * ||.||_{1,2}`.
///
/// Groups with zero norm stay at zero.
pub fn prox_group_l12(x: &[f64], layout: &GroupLayout, gamma: f64) -> Result<Vec<f64>> {
    let mut out = x.to_vec();
    prox_group_l12_inplace(&mut out, layout, gamma)?;
    Ok(out)
}

pub fn prox_group_l12_inplace(x: &mut [f64], layout: &GroupLayout, gamma: f64) -> Result<()> {
    positive("gamma", gamma)?;
    layout.check(x.len())?;
    for g in 0..layout.n_groups {
        let norm = layout.members(g).map(|i| x[i] * x[i]).sum::<f64>().sqrt();
        let scale = if norm > 0.0 {
            (1.0 - gamma / norm).max(0.0)
        } else {
            0.0
        };
        layout.members(g).for_each(|i| x[i] *= scale);
    }
    Ok(())
}

/// Projection onto `{y : ||y - center|| <= radius}`.
pub fn project_l2_ball(x: &[f64], center: &[f64], radius: f64) -> Result<Vec<f64>> {
    let mut out = x.to_vec();
    project_l2_ball_inplace(&mut out, center, radius)?;
    Ok(out)
}

pub fn project_l2_ball_inplace(x: &mut [f64], center: &[f64], radius: f64) -> Result<()> {
    if !(radius >= 0.0) || !radius.is_finite() {
        return Err(Error::param(format!(
            "ball radius must be finite and >= 0, got {radius}"
        )));
    }
    if x.len() != center.len() {
        return Err(Error::dim(format!(
            "point has {} entries, center has {}",
            x.len(),
            center.len()
        )));
    }
    let dist = x
        .iter()
        .zip(center)
        .map(|(a, c)| (a - c) * (a - c))
        .sum::<f64>()
        .sqrt();
    if dist > radius {
        let s = radius / dist;
        x.iter_mut()
            .zip(center)
            .for_each(|(a, c)| *a = c + s * (*a - c));
    }
    Ok(())
}

/// `x - gamma * prox_{f / gamma}(x / gamma)`, the proximity operator of
/// `gamma * f*`.
///
/// `prox_f(w, t)` must return the proximity operator of `t * f` at `w`.
pub fn prox_conjugate<F>(prox_f: F, x: &[f64], gamma: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64], f64) -> Result<Vec<f64>>,
{
    positive("gamma", gamma)?;
    let scaled: Vec<f64> = x.iter().map(|v| v / gamma).collect();
    let p = prox_f(&scaled, 1.0 / gamma)?;
    if p.len() != x.len() {
        return Err(Error::dim(format!(
            "prox returned {} entries for {}",
            p.len(),
            x.len()
        )));
    }
    Ok(x.iter().zip(&p).map(|(a, b)| a - gamma * b).collect())
}

/// In-place [`prox_conjugate`]; `scratch` must be as long as `x`.
pub fn prox_conjugate_inplace<F>(
    prox_f: F,
    x: &mut [f64],
    gamma: f64,
    scratch: &mut [f64],
) -> Result<()>
where
    F: FnOnce(&mut [f64], f64) -> Result<()>,
{
    positive("gamma", gamma)?;
    if scratch.len() != x.len() {
        return Err(Error::dim("scratch buffer length"));
    }
    scratch
        .iter_mut()
        .zip(x.iter())
        .for_each(|(s, v)| *s = v / gamma);
    prox_f(scratch, 1.0 / gamma)?;
    x.iter_mut()
        .zip(scratch.iter())
        .for_each(|(v, p)| *v -= gamma * p);
    Ok(())
}

/// `||x||_{1,2}` under `layout`.
pub fn group_l12_norm(x: &[f64], layout: &GroupLayout) -> Result<f64> {
    layout.check(x.len())?;
    Ok(layout.group_norms(x).sum())
}

pub fn l1_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

/// Distance from `x` to `center`.
pub fn distance(x: &[f64], center: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), center.len());
    let d: Vec<f64> = x.iter().zip(center).map(|(a, b)| a - b).collect();
    norm2(&d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn box_examples() {
        assert_eq!(
            prox_box(&[-0.5, 0.3, 2.0], 0.0, 1.0, 0.7).unwrap(),
            vec![0.0, 0.3, 1.0]
        );
        assert_eq!(
            prox_box(&[0.1, 0.9], 0.0, 1.0, 5.0).unwrap(),
            vec![0.1, 0.9]
        );
        assert!(prox_box(&[0.1], 1.0, 1.0, 1.0).is_err());
        assert!(prox_box(&[0.1], 2.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(
            prox_l1(&[2.0, -0.5, -3.0], 1.0).unwrap(),
            vec![1.0, 0.0, -2.0]
        );
        assert!(prox_l1(&[0.2, -0.7, 0.69], 0.7)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
        assert!(prox_l1(&[1.0], 0.0).is_err());
    }

    #[test]
    fn group_examples() {
        let one = GroupLayout::new(1, 2, 1).unwrap();
        assert!(close(
            &prox_group_l12(&[3.0, 4.0], &one, 1.0).unwrap(),
            &[2.4, 3.2],
            1e-15
        ));
        assert_eq!(
            prox_group_l12(&[0.3, 0.4], &one, 0.5).unwrap(),
            vec![0.0, 0.0]
        );
        assert_eq!(
            prox_group_l12(&[0.0, 0.0], &one, 0.5).unwrap(),
            vec![0.0, 0.0]
        );

        // stride layout: groups {0, 2} and {1, 3}
        let two = GroupLayout::blocks(2, 2).unwrap();
        let out = prox_group_l12(&[3.0, 0.0, 4.0, 0.1], &two, 1.0).unwrap();
        assert!(close(&out, &[2.4, 0.0, 3.2, 0.0], 1e-15));
        assert!(prox_group_l12(&[1.0; 5], &two, 1.0).is_err());
    }

    #[test]
    fn group_size_one_is_soft_threshold() {
        let x = [0.3, -1.2, 2.5, -0.05, 0.0];
        let layout = GroupLayout::new(5, 1, 0).unwrap();
        assert_eq!(
            prox_group_l12(&x, &layout, 0.4).unwrap(),
            prox_l1(&x, 0.4).unwrap()
        );
    }

    #[test]
    fn ball_examples() {
        assert!(close(
            &project_l2_ball(&[3.0, 4.0], &[0.0, 0.0], 1.0).unwrap(),
            &[0.6, 0.8],
            1e-15
        ));
        assert_eq!(
            project_l2_ball(&[0.1, 0.2], &[0.0, 0.0], 1.0).unwrap(),
            vec![0.1, 0.2]
        );
        assert_eq!(
            project_l2_ball(&[5.0, -1.0], &[0.5, 0.5], 0.0).unwrap(),
            vec![0.5, 0.5]
        );
        assert!(project_l2_ball(&[1.0], &[0.0], -1.0).is_err());
        assert!(project_l2_ball(&[1.0], &[0.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn conjugate_examples() {
        // f = indicator of {0}: prox is 0, so the conjugate prox is the identity.
        let x = [0.3, -2.0, 7.5];
        let zero = |w: &[f64], _t: f64| Ok(vec![0.0; w.len()]);
        assert_eq!(prox_conjugate(zero, &x, 0.7).unwrap(), x.to_vec());

        let l1 = |w: &[f64], t: f64| prox_l1(w, t);
        assert!(close(
            &prox_conjugate(l1, &[0.4], 1.0).unwrap(),
            &[0.4],
            1e-15
        ));
        // conjugate of l1 is the indicator of the unit ∞-ball
        assert!(close(
            &prox_conjugate(l1, &[2.5, -3.0, 0.2], 0.5).unwrap(),
            &[1.0, -1.0, 0.2],
            1e-15
        ));
    }

    #[test]
    fn inplace_conjugate_matches_allocating() {
        let x = [0.4, -1.7, 2.2, 0.05];
        let layout = GroupLayout::blocks(2, 2).unwrap();
        let a = prox_conjugate(|w, t| prox_group_l12(w, &layout, 0.3 * t), &x, 0.8).unwrap();
        let mut b = x.to_vec();
        let mut scratch = vec![0.0; 4];
        prox_conjugate_inplace(
            |w, t| prox_group_l12_inplace(w, &layout, 0.3 * t),
            &mut b,
            0.8,
            &mut scratch,
        )
        .unwrap();
        assert_eq!(a, b);
    }
}
