use super::{check_lengths, LinearOperator, SpatialDiff, SpectralDiff};
use crate::cube::CubeDims;
use crate::error::{Error, Result};

/// `A_ω = [D D_b; ω D]`, the operator whose mixed norm is the HSSTV regularizer.
///
/// Output blocks (each `nv * nh * b` long): `D_v D_b u`, `D_h D_b u`,
/// `ω D_v u`, `ω D_h u`. Component `i` of the four blocks belong to the same
/// group for the ℓ1,2 norm.
#[derive(Debug, Clone)]
pub struct Hsstv {
    dims: CubeDims,
    omega: f64,
    spatial: SpatialDiff,
    spectral: SpectralDiff,
}

impl Hsstv {
    pub fn new(dims: CubeDims, omega: f64) -> Result<Self> {
        if !(omega >= 0.0) || !omega.is_finite() {
            return Err(Error::param(format!(
                "omega must be finite and >= 0, got {omega}"
            )));
        }
        Ok(Self {
            dims,
            omega,
            spatial: SpatialDiff::new(dims),
            spectral: SpectralDiff::new(dims),
        })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn dims(&self) -> CubeDims {
        self.dims
    }
}

impl LinearOperator for Hsstv {
    fn in_dim(&self) -> usize {
        self.dims.len()
    }

    fn out_dim(&self) -> usize {
        4 * self.dims.len()
    }

    fn name(&self) -> &str {
        "A_omega"
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        check_lengths(self, x.len(), out.len(), false);
        let nb = self.dims.len();
        let spectral = self.spectral.apply(x);
        let (top, bottom) = out.split_at_mut(2 * nb);
        self.spatial.apply_into(&spectral, top);
        self.spatial.apply_into(x, bottom);
        bottom.iter_mut().for_each(|v| *v *= self.omega);
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        check_lengths(self, y.len(), out.len(), true);
        let nb = self.dims.len();
        let (top, bottom) = y.split_at(2 * nb);
        let t = self.spatial.adjoint(top);
        self.spectral.adjoint_into(&t, out);
        let s = self.spatial.adjoint(bottom);
        for (o, v) in out.iter_mut().zip(&s) {
            *o += self.omega * v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_omega_kills_lower_half() {
        let dims = CubeDims::new(3, 4, 3).unwrap();
        let x: Vec<f64> = (0..dims.len())
            .map(|i| ((i * 7919) % 13) as f64 / 13.0)
            .collect();
        let out = Hsstv::new(dims, 0.0).unwrap().apply(&x);
        assert!(out[2 * dims.len()..].iter().all(|&v| v == 0.0));
        assert!(out[..2 * dims.len()].iter().any(|&v| v != 0.0));
    }

    #[test]
    fn constants_map_to_zero() {
        let dims = CubeDims::new(4, 4, 3).unwrap();
        let out = Hsstv::new(dims, 0.3)
            .unwrap()
            .apply(&vec![0.25; dims.len()]);
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn negative_omega_is_rejected() {
        let dims = CubeDims::new(2, 2, 2).unwrap();
        assert!(matches!(Hsstv::new(dims, -0.01), Err(Error::Parameter(_))));
        assert!(Hsstv::new(dims, f64::NAN).is_err());
    }
}
