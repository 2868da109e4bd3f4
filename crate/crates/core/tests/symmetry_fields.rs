use fpv_core::imageio::GrayImage;
use fpv_core::symmetry::filter::Kernel1D;
use fpv_core::symmetry::{
    compute_fields, linear_symmetry, orientation_tensor_of, parabolic_reference, parabolic_symmetry,
    FilterParams, SymmetryConfig,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Full 2D correlation with the outer product of two 1D kernels, every tap
/// summed explicitly. `replicate` clamps coordinates, otherwise outside
/// samples are zero.
fn direct<T>(src: &[T], w: usize, h: usize, kx: &Kernel1D, ky: &Kernel1D, replicate: bool) -> Vec<Complex64>
where
    T: Copy + Into<Complex64>,
{
    let mut out = vec![Complex64::default(); w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut acc = Complex64::default();
            for (v, ty) in ky.offsets() {
                for (u, tx) in kx.offsets() {
                    let (mut sx, mut sy) = (x + u, y + v);
                    if replicate {
                        sx = sx.clamp(0, w as isize - 1);
                        sy = sy.clamp(0, h as isize - 1);
                    } else if sx < 0 || sy < 0 || sx >= w as isize || sy >= h as isize {
                        continue;
                    }
                    acc += src[sy as usize * w + sx as usize].into() * (tx * ty);
                }
            }
            out[y as usize * w + x as usize] = acc;
        }
    }
    out
}

fn rel_err(a: &[Complex64], b: &[Complex64]) -> f64 {
    let scale = b.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1e-300);
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / scale
}

fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Vec<f64> {
    (0..w * h).map(|_| rng.random_range(0.0..255.0)).collect()
}

#[test]
fn separable_filters_match_direct_sums() {
    let params = FilterParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let (w, h) = (32, 32);
    for _ in 0..50 {
        let img = random_image(&mut rng, w, h);
        let z = orientation_tensor_of(&img, w, h, &params).unwrap();

        let g = Kernel1D::gaussian(params.sigma_deriv);
        let d = Kernel1D::gaussian_derivative(params.sigma_deriv);
        let fx = direct(&img, w, h, &d, &g, true);
        let fy = direct(&img, w, h, &g, &d, true);
        let z_ref: Vec<Complex64> = fx
            .iter()
            .zip(&fy)
            .map(|(a, b)| {
                let c = Complex64::new(a.re, b.re);
                c * c
            })
            .collect();
        assert!(rel_err(&z.values, &z_ref) <= 1e-6);

        let ga = Kernel1D::gaussian(params.sigma_avg);
        let mags: Vec<f64> = z.values.iter().map(|v| v.norm()).collect();
        let num = direct(&z.values, w, h, &ga, &ga, false);
        let den = direct(&mags, w, h, &ga, &ga, false);
        let ls_ref: Vec<Complex64> = num.iter().zip(&den).map(|(n, d)| n / d.re).collect();
        let ls = linear_symmetry(&z, &params);
        assert!(rel_err(&ls.values, &ls_ref) <= 1e-6);

        // <z, (x + iy) g> summed tap by tap
        let gp = Kernel1D::gaussian(params.sigma_para);
        let r = gp.radius as isize;
        let den = direct(&mags, w, h, &gp, &gp, false);
        let reference = parabolic_reference(params.sigma_para);
        let mut ps_ref = vec![Complex64::default(); w * h];
        for y in 0..h as isize {
            for x in 0..w as isize {
                let mut acc = Complex64::default();
                for v in -r..=r {
                    for u in -r..=r {
                        let (sx, sy) = (x + u, y + v);
                        if sx < 0 || sy < 0 || sx >= w as isize || sy >= h as isize {
                            continue;
                        }
                        let q = Complex64::new(u as f64, v as f64).conj();
                        let gw = gp.taps[(u + r) as usize] * gp.taps[(v + r) as usize];
                        acc += z.values[sy as usize * w + sx as usize] * q * gw;
                    }
                }
                let i = y as usize * w + x as usize;
                ps_ref[i] = acc / (den[i].re * reference);
            }
        }
        let ps = parabolic_symmetry(&z, &params).unwrap();
        assert!(rel_err(&ps.values, &ps_ref) <= 1e-6);
    }
}

/// Quarter turn `(x, y) -> (n-1-y, x)` of a square raster.
fn rotate90<T: Copy>(v: &[T], n: usize) -> Vec<T> {
    (0..n * n)
        .map(|i| {
            let (xr, yr) = (i % n, i / n);
            v[(n - 1 - xr) * n + yr]
        })
        .collect()
}

#[test]
fn quarter_turn_rotates_field_arguments() {
    let params = FilterParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(90);
    let n = 40;
    for _ in 0..5 {
        let img = random_image(&mut rng, n, n);
        let z = orientation_tensor_of(&img, n, n, &params).unwrap();
        let zr = orientation_tensor_of(&rotate90(&img, n), n, n, &params).unwrap();
        let ls = linear_symmetry(&z, &params);
        let lsr = linear_symmetry(&zr, &params);
        let ps = parabolic_symmetry(&z, &params).unwrap();
        let psr = parabolic_symmetry(&zr, &params).unwrap();
        // gradients turn by 90 degrees: z by 180, PS by 90
        let expect_ls: Vec<Complex64> = rotate90(&ls.values, n).iter().map(|v| -v).collect();
        let expect_ps: Vec<Complex64> = rotate90(&ps.values, n).iter().map(|v| v * Complex64::i()).collect();
        assert!(rel_err(&lsr.values, &expect_ls) < 1e-9);
        assert!(rel_err(&psr.values, &expect_ps) < 1e-9);
    }
}

#[test]
fn noise_has_weak_linear_symmetry() {
    let params = FilterParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 96;
    let img = random_image(&mut rng, n, n);
    let z = orientation_tensor_of(&img, n, n, &params).unwrap();
    let ls = linear_symmetry(&z, &params);
    let mean = ls.values.iter().map(|v| v.norm()).sum::<f64>() / (n * n) as f64;
    assert!(mean < 0.25, "mean |LS| on noise {mean}");
    assert!(ls.values.iter().all(|v| v.norm() <= 1.0 + 1e-12));
}

/// Ridges inside a disk of radius `r` around the centre, flat grey outside.
fn ridge_disk(n: usize, r: f64) -> GrayImage {
    let c = (n as f64 - 1.0) / 2.0;
    GrayImage::from_fn(n, n, |x, y| {
        let (dx, dy) = (x as f64 - c, y as f64 - c);
        if dx.hypot(dy) <= r {
            (128.0 + 100.0 * (std::f64::consts::TAU * 0.1 * (0.8 * dx + 0.6 * dy)).cos()).round() as u8
        } else {
            128
        }
    })
}

#[test]
fn segmentation_follows_ridge_area() {
    let n = 160;
    let r = 50.0;
    let fields = compute_fields(&ridge_disk(n, r), &SymmetryConfig::default()).unwrap();
    let c = (n as f64 - 1.0) / 2.0;
    let (mut inside, mut inside_hit, mut far_hit) = (0, 0, 0);
    for y in 0..n {
        for x in 0..n {
            let d = (x as f64 - c).hypot(y as f64 - c);
            let m = fields.mask.get(x, y);
            if d <= r - 8.0 {
                inside += 1;
                inside_hit += m as usize;
            }
            if d >= r + 16.0 && m {
                far_hit += 1;
            }
        }
    }
    assert_eq!(inside_hit, inside, "disk interior is foreground");
    assert_eq!(far_hit, 0, "flat surround is background");
}

