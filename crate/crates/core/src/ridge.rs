//! Valley (dark wall) detection with a multiscale Meijering filter.
//!
//! Per scale the Gaussian Hessian is formed by separable convolution with
//! sampled Gaussian-derivative kernels (reflect padding), scale-normalized by
//! `sigma^2`. Eigenvalues are shaped to `l_i = e_i + alpha * sum_{j != i} e_j`;
//! the shaped eigenvalue of largest magnitude is kept when it indicates a
//! bright ridge of the sign-adjusted input. Each scale is normalized to a
//! volume-wide maximum of 1 and the output is the voxelwise max over scales.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::volume::{Grid, Volume};

/// Eigenvalue shaping constant, `1 / (ndim + 1)`.
pub const SHAPE_ALPHA: f64 = 0.25;

/// Kernel half-width in standard deviations.
const TRUNCATE: f64 = 4.0;

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeParams {
    /// Gaussian sigmas in mm.
    pub scales: Vec<f64>,
    /// Detect dark structures (walls between bright lumens).
    pub black_ridges: bool,
}

impl Default for RidgeParams {
    fn default() -> Self {
        RidgeParams {
            scales: vec![2.0, 3.0],
            black_ridges: true,
        }
    }
}

impl RidgeParams {
    pub fn validate(&self) -> Result<()> {
        if self.scales.is_empty() {
            return Err(Error::param("scales", "at least one scale is required"));
        }
        if let Some(s) = self.scales.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::param("scales", format!("scale {s} must be positive")));
        }
        Ok(())
    }
}

/// The six unique second derivatives of the smoothed volume, each multiplied
/// by `sigma^2`.
#[derive(Debug, Clone)]
pub struct Hessian {
    pub grid: Grid,
    pub xx: Vec<f64>,
    pub yy: Vec<f64>,
    pub zz: Vec<f64>,
    pub xy: Vec<f64>,
    pub xz: Vec<f64>,
    pub yz: Vec<f64>,
}

/// Correlation kernels along one axis: smoothing, first and second derivative.
#[derive(Debug, Clone)]
pub(crate) struct AxisKernels {
    pub smooth: Vec<f64>,
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

impl AxisKernels {
    pub fn new(sigma_mm: f64, spacing: f64) -> Self {
        let sv = sigma_mm / spacing;
        let radius = (TRUNCATE * sv).ceil().max(1.0) as usize;
        let offsets: Vec<f64> = (0..=2 * radius).map(|i| i as f64 - radius as f64).collect();

        let mut smooth: Vec<f64> = offsets.iter().map(|k| (-k * k / (2.0 * sv * sv)).exp()).collect();
        let total: f64 = smooth.iter().sum();
        smooth.iter_mut().for_each(|w| *w /= total);

        // d/dx in mm: exact on linear ramps, sum(w * k * h) = 1.
        let mut first: Vec<f64> = offsets.iter().zip(&smooth).map(|(k, g)| k * g).collect();
        let m1: f64 = first.iter().zip(&offsets).map(|(w, k)| w * k * spacing).sum();
        first.iter_mut().for_each(|w| *w /= m1);

        // d2/dx2 in mm^-2: zero-sum and exact on quadratics.
        let mut second: Vec<f64> = offsets
            .iter()
            .zip(&smooth)
            .map(|(k, g)| (k * k / (sv * sv) - 1.0) * g)
            .collect();
        let mean_shift: f64 = second.iter().sum::<f64>();
        second
            .iter_mut()
            .zip(&smooth)
            .for_each(|(w, g)| *w -= mean_shift * g);
        let m2: f64 = second
            .iter()
            .zip(&offsets)
            .map(|(w, k)| w * k * k * spacing * spacing)
            .sum();
        second.iter_mut().for_each(|w| *w *= 2.0 / m2);

        AxisKernels {
            smooth,
            first,
            second,
        }
    }
}

/// Half-sample symmetric reflection (`d c b a | a b c d | d c b a`).
#[inline]
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m >= n { period - 1 - m } else { m }) as usize
}

/// 1D correlation along `axis` with reflect padding.
pub(crate) fn correlate_axis(data: &[f64], dims: [usize; 3], axis: usize, kernel: &[f64]) -> Vec<f64> {
    let [nx, ny, nz] = dims;
    let radius = (kernel.len() / 2) as isize;
    let stride = [1, nx, nx * ny][axis];
    let n = dims[axis];
    let slab = nx * ny;
    let mut out = vec![0.0; data.len()];
    out.par_chunks_mut(slab).enumerate().for_each(|(k, slice)| {
        for j in 0..ny {
            for i in 0..nx {
                let c = [i, j, k];
                let pos = c[axis] as isize;
                let base = i + nx * (j + ny * k) - c[axis] * stride;
                let mut acc = 0.0;
                for (t, w) in kernel.iter().enumerate() {
                    let src = reflect(pos + t as isize - radius, n);
                    acc += w * data[base + src * stride];
                }
                slice[i + nx * j] = acc;
            }
        }
    });
    debug_assert_eq!(nz * slab, data.len());
    out
}

/// Scale-normalized Gaussian Hessian at `sigma` mm.
pub fn gaussian_hessian(vol: &Volume, sigma: f64) -> Result<Hessian> {
    let grid = vol.grid().clone();
    let min_spacing = grid.spacing.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(sigma >= min_spacing) {
        return Err(Error::param(
            "sigma",
            format!("{sigma} mm is below the voxel spacing {min_spacing} mm"),
        ));
    }
    let (lo, _) = vol.min_max();
    let data: Vec<f64> = vol.data().iter().map(|&v| v as f64 - lo as f64).collect();
    Ok(hessian_of(&data, grid, sigma))
}

fn hessian_of(data: &[f64], grid: Grid, sigma: f64) -> Hessian {
    let dims = grid.dims;
    let kx = AxisKernels::new(sigma, grid.spacing[0]);
    let ky = AxisKernels::new(sigma, grid.spacing[1]);
    let kz = AxisKernels::new(sigma, grid.spacing[2]);

    let z0 = correlate_axis(data, dims, 2, &kz.smooth);
    let z1 = correlate_axis(data, dims, 2, &kz.first);
    let z2 = correlate_axis(data, dims, 2, &kz.second);

    let y00 = correlate_axis(&z0, dims, 1, &ky.smooth);
    let y10 = correlate_axis(&z0, dims, 1, &ky.first);
    let y20 = correlate_axis(&z0, dims, 1, &ky.second);
    let y01 = correlate_axis(&z1, dims, 1, &ky.smooth);
    let y11 = correlate_axis(&z1, dims, 1, &ky.first);
    let y02 = correlate_axis(&z2, dims, 1, &ky.smooth);

    let norm = sigma * sigma;
    let finish = |src: &[f64], kernel: &[f64]| -> Vec<f64> {
        let mut v = correlate_axis(src, dims, 0, kernel);
        v.iter_mut().for_each(|x| *x *= norm);
        v
    };
    Hessian {
        xx: finish(&y00, &kx.second),
        xy: finish(&y10, &kx.first),
        yy: finish(&y20, &kx.smooth),
        xz: finish(&y01, &kx.first),
        yz: finish(&y11, &kx.smooth),
        zz: finish(&y02, &kx.smooth),
        grid,
    }
}

/// Eigenvalues of a symmetric 3x3 matrix in ascending order.
pub fn symmetric_eigenvalues(xx: f64, yy: f64, zz: f64, xy: f64, xz: f64, yz: f64) -> [f64; 3] {
    let p1 = xy * xy + xz * xz + yz * yz;
    let mut e = if p1 == 0.0 {
        [xx, yy, zz]
    } else {
        let q = (xx + yy + zz) / 3.0;
        let (a, b, c) = (xx - q, yy - q, zz - q);
        let p2 = a * a + b * b + c * c + 2.0 * p1;
        let p = (p2 / 6.0).sqrt();
        let det = a * (b * c - yz * yz) - xy * (xy * c - yz * xz) + xz * (xy * yz - b * xz);
        let r = (det / (2.0 * p * p * p)).clamp(-1.0, 1.0);
        let phi = r.acos() / 3.0;
        let hi = q + 2.0 * p * phi.cos();
        let lo = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
        [lo, 3.0 * q - hi - lo, hi]
    };
    e.sort_by(f64::total_cmp);
    e
}

/// Ridge strength from Hessian eigenvalues of the sign-adjusted input
/// (bright ridges have a negative dominant eigenvalue).
#[inline]
fn shaped_response(e: [f64; 3]) -> f64 {
    let sum = e[0] + e[1] + e[2];
    let mut best = 0.0f64;
    for &l in &e {
        let shaped = l + SHAPE_ALPHA * (sum - l);
        if shaped.abs() > best.abs() {
            best = shaped;
        }
    }
    (-best).max(0.0)
}

/// Multiscale valley/ridge response in [0, 1].
pub fn meijering_response(vol: &Volume, params: &RidgeParams) -> Result<Volume> {
    params.validate()?;
    let grid = vol.grid().clone();
    let min_spacing = grid.spacing.iter().cloned().fold(f64::INFINITY, f64::min);
    if let Some(s) = params.scales.iter().find(|&&s| s < min_spacing) {
        return Err(Error::param(
            "scales",
            format!("scale {s} mm is below the voxel spacing {min_spacing} mm"),
        ));
    }
    // Centering on the minimum keeps the result exact under global shifts.
    let (lo, _) = vol.min_max();
    let sign = if params.black_ridges { -1.0 } else { 1.0 };
    let data: Vec<f64> = vol
        .data()
        .iter()
        .map(|&v| sign * (v as f64 - lo as f64))
        .collect();

    let mut combined = vec![0.0f64; grid.len()];
    for &sigma in &params.scales {
        let h = hessian_of(&data, grid.clone(), sigma);
        let resp: Vec<f64> = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                shaped_response(symmetric_eigenvalues(
                    h.xx[i], h.yy[i], h.zz[i], h.xy[i], h.xz[i], h.yz[i],
                ))
            })
            .collect();
        let max = resp.iter().cloned().fold(0.0f64, f64::max);
        if max > 0.0 {
            for (c, r) in combined.iter_mut().zip(&resp) {
                *c = c.max(r / max);
            }
        }
    }
    Volume::new(grid, combined.into_iter().map(|v| v as f32).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Grid;

    #[test]
    fn reflect_indices() {
        let got: Vec<usize> = (-4..8).map(|i| reflect(i, 4)).collect();
        assert_eq!(got, vec![3, 2, 1, 0, 0, 1, 2, 3, 3, 2, 1, 0]);
        assert_eq!(reflect(-7, 2), 1);
    }

    #[test]
    fn kernels_are_exact_on_polynomials() {
        for (sigma, h) in [(2.0, 2.0), (3.0, 2.0), (1.3, 0.7)] {
            let k = AxisKernels::new(sigma, h);
            let r = (k.smooth.len() / 2) as f64;
            let s: f64 = k.smooth.iter().sum();
            let d1: f64 = k.first.iter().enumerate().map(|(i, w)| w * (i as f64 - r) * h).sum();
            let d2: f64 = k.second.iter().enumerate().map(|(i, w)| w * ((i as f64 - r) * h).powi(2)).sum();
            let z2: f64 = k.second.iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
            assert!((d1 - 1.0).abs() < 1e-12);
            assert!((d2 - 2.0).abs() < 1e-12);
            assert!(z2.abs() < 1e-12);
        }
    }

    #[test]
    fn constant_volume_has_zero_hessian_and_response() {
        let g = Grid::isotropic([9, 8, 7], 2.0).unwrap();
        let v = Volume::filled(g, 123.0);
        let h = gaussian_hessian(&v, 2.0).unwrap();
        for c in [&h.xx, &h.yy, &h.zz, &h.xy, &h.xz, &h.yz] {
            assert!(c.iter().all(|&x| x == 0.0));
        }
        let r = meijering_response(&v, &RidgeParams::default()).unwrap();
        assert!(r.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn sigma_below_spacing_rejected() {
        let g = Grid::isotropic([5, 5, 5], 2.0).unwrap();
        let v = Volume::filled(g, 0.0);
        assert!(gaussian_hessian(&v, 1.0).is_err());
        let p = RidgeParams {
            scales: vec![1.5],
            black_ridges: true,
        };
        assert!(meijering_response(&v, &p).is_err());
        assert!(RidgeParams { scales: vec![], black_ridges: true }.validate().is_err());
    }

    #[test]
    fn eigenvalues_of_known_matrices() {
        let e = symmetric_eigenvalues(2.0, 3.0, 1.0, 0.0, 0.0, 0.0);
        assert_eq!(e, [1.0, 2.0, 3.0]);
        // [[2,1,0],[1,2,0],[0,0,5]] -> 1, 3, 5
        let e = symmetric_eigenvalues(2.0, 2.0, 5.0, 1.0, 0.0, 0.0);
        for (a, b) in e.iter().zip([1.0, 3.0, 5.0]) {
            assert!((a - b).abs() < 1e-12, "{e:?}");
        }
        // [[4,1,2],[1,0,3],[2,3,-1]]: trace 3, check characteristic invariants
        let e = symmetric_eigenvalues(4.0, 0.0, -1.0, 1.0, 2.0, 3.0);
        let tr: f64 = e.iter().sum();
        let det = e[0] * e[1] * e[2];
        let m_det = 4.0 * (0.0 * -1.0 - 9.0) - 1.0 * (1.0 * -1.0 - 3.0 * 2.0) + 2.0 * (3.0 - 0.0);
        assert!((tr - 3.0).abs() < 1e-12);
        assert!((det - m_det).abs() < 1e-9);
    }

    #[test]
    fn sheet_responds_lumen_does_not() {
        // Sign-adjusted sheet: one strongly negative eigenvalue.
        assert!(shaped_response([-1.0, 0.0, 0.0]) > 0.9);
        // Bright tube in the original image after negation: positive pair.
        assert_eq!(shaped_response([0.0, 1.0, 1.0]), 0.0);
    }

    #[test]
    fn dark_plane_is_the_argmax() {
        let g = Grid::isotropic([15, 12, 12], 2.0).unwrap();
        let v = Volume::from_fn(g, |[i, _, _]| if i == 7 { 20.0 } else { 200.0 });
        let r = meijering_response(&v, &RidgeParams::default()).unwrap();
        let (arg, _) = r
            .data()
            .iter()
            .enumerate()
            .fold((0, f32::MIN), |b, (i, &x)| if x > b.1 { (i, x) } else { b });
        assert_eq!(r.grid().coords(arg)[0], 7);
    }

    #[test]
    fn quadratic_ramp_has_second_derivative_two() {
        let g = Grid::isotropic([40, 9, 9], 2.0).unwrap();
        let v = Volume::from_fn(g.clone(), |c| {
            let x = g.position_of(c)[0] - 40.0;
            (x * x) as f32
        });
        let sigma = 2.0;
        let h = gaussian_hessian(&v, sigma).unwrap();
        let reach = (TRUNCATE * sigma / 2.0).ceil() as usize + 1;
        for i in reach..40 - reach {
            let d2 = h.xx[g.index(i, 4, 4)] / (sigma * sigma);
            assert!((d2 - 2.0).abs() <= 0.05 * 2.0, "x = {i}: {d2}");
            assert!(h.yy[g.index(i, 4, 4)].abs() < 1e-6);
        }
    }

    #[test]
    fn separable_equals_direct_convolution() {
        let n = 11;
        let g = Grid::isotropic([n, n, n], 1.0).unwrap();
        let mut state = 0x2545f4914f6cdd1du64;
        let data: Vec<f64> = (0..g.len())
            .map(|_| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                (state % 1000) as f64 / 10.0
            })
            .collect();
        let sigma = 1.5;
        let h = hessian_of(&data, g.clone(), sigma);
        let k = AxisKernels::new(sigma, 1.0);
        let r = (k.smooth.len() / 2) as isize;
        let direct = |kx: &[f64], ky: &[f64], kz: &[f64], idx: usize| -> f64 {
            let [i, j, l] = g.coords(idx).map(|c| c as isize);
            let mut acc = 0.0;
            for (c, wz) in kz.iter().enumerate() {
                let z = reflect(l + c as isize - r, n);
                for (b, wy) in ky.iter().enumerate() {
                    let y = reflect(j + b as isize - r, n);
                    for (a, wx) in kx.iter().enumerate() {
                        let x = reflect(i + a as isize - r, n);
                        acc += wx * wy * wz * data[g.index(x, y, z)];
                    }
                }
            }
            acc * sigma * sigma
        };
        let (s0, s1, s2) = (&k.smooth[..], &k.first[..], &k.second[..]);
        for idx in (0..g.len()).step_by(7) {
            let want = [
                (direct(s2, s0, s0, idx), h.xx[idx]),
                (direct(s0, s2, s0, idx), h.yy[idx]),
                (direct(s0, s0, s2, idx), h.zz[idx]),
                (direct(s1, s1, s0, idx), h.xy[idx]),
                (direct(s1, s0, s1, idx), h.xz[idx]),
                (direct(s0, s1, s1, idx), h.yz[idx]),
            ];
            for (d, s) in want {
                assert!((d - s).abs() <= 1e-5, "{idx}: {d} vs {s}");
            }
        }
    }
}
