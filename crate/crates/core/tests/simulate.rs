use hsstv_core::metrics::psnr;
use hsstv_core::operators::SpectralResponse;
use hsstv_core::simulate::{
    blind_radii, make_test_cube, simulate_observations, upsample_nearest, DegradationSpec, Pattern,
};

fn pan(bands: usize) -> SpectralResponse {
    let (lo, hi) = SpectralResponse::default_pan_range(bands);
    SpectralResponse::pan_average(bands, lo, hi).unwrap()
}

#[test]
fn noise_energy_matches_expectation() {
    let truth = make_test_cube(16, 16, 4, Pattern::Textured, 0).unwrap();
    let (sv, sg) = (0.1, 0.02);
    let draws = 100;
    let (mut ev, mut eg) = (0.0, 0.0);
    for seed in 0..draws {
        let obs =
            simulate_observations(&truth, &DegradationSpec::new(2, sv, sg, pan(4), seed)).unwrap();
        ev += obs.epsilon_oracle.powi(2);
        eg += obs.eta_oracle.powi(2);
    }
    let nb = truth.data().len() as f64;
    let expect_v = sv * sv * nb / 4.0;
    let expect_g = sg * sg * 256.0;
    assert!((ev / draws as f64 / expect_v - 1.0).abs() < 0.05);
    assert!((eg / draws as f64 / expect_g - 1.0).abs() < 0.05);

    let (bv, bg) = blind_radii(sv, sg, truth.data().len() / 4, 256);
    assert!((bv * bv - expect_v).abs() < 1e-9);
    assert!((bg * bg - expect_g).abs() < 1e-12);
}

#[test]
fn noiseless_baseline_psnr_is_reproducible() {
    let truth = make_test_cube(16, 16, 6, Pattern::Blocks, 3).unwrap();
    let spec = DegradationSpec::new(2, 0.0, 0.0, pan(6), 0);
    let a = simulate_observations(&truth, &spec).unwrap();
    let b = simulate_observations(&truth, &spec).unwrap();
    let pa = psnr(&upsample_nearest(&a.v, 2).unwrap(), &truth).unwrap();
    let pb = psnr(&upsample_nearest(&b.v, 2).unwrap(), &truth).unwrap();
    assert!(pa.is_finite());
    assert_eq!(pa.to_bits(), pb.to_bits());
}

#[test]
fn guide_has_response_band_count() {
    let truth = make_test_cube(16, 16, 6, Pattern::Blocks, 1).unwrap();
    let resp = SpectralResponse::uniform_windows(6, 3).unwrap();
    let obs = simulate_observations(&truth, &DegradationSpec::new(4, 0.2, 0.05, resp, 5)).unwrap();
    assert_eq!(obs.g.bands(), 3);
    assert_eq!((obs.v.nv(), obs.v.nh(), obs.v.bands()), (4, 4, 6));
}
