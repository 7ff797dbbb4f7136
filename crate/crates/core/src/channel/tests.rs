use super::*;

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn los_limit_energy() {
    let s = Scenario {
        rician_k: 1e12,
        ..Scenario::default()
    };
    let pair = nominal_channel::<f64>(&s, 3).unwrap();
    let g = path_gain(&s, s.uav_position).unwrap();
    let rel = (pair.h_b.frobenius_sq() / (g * 96.0) - 1.0).abs();
    assert!(rel < 1e-3, "{rel}");
    assert_eq!((pair.h_b.rows(), pair.h_b.cols()), (6, 16));
    assert_eq!((pair.h_e.rows(), pair.h_e.cols()), (6, 16));
}

#[test]
fn nominal_is_deterministic_per_seed() {
    let s = Scenario::default();
    let a = nominal_channel::<f64>(&s, 42).unwrap();
    let b = nominal_channel::<f64>(&s, 42).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, nominal_channel::<f64>(&s, 43).unwrap());
}

#[test]
fn pure_scattering_energy_matches_path_gain() {
    let s = Scenario {
        rician_k: 0.0,
        ..Scenario::default()
    };
    let g = path_gain(&s, s.uav_position).unwrap();
    let samples: Vec<f64> = (0..10_000)
        .map(|seed| nominal_channel::<f64>(&s, seed).unwrap().h_b.frobenius_sq() / 96.0)
        .collect();
    let (mean, se) = mean_and_se(&samples);
    assert!((mean - g).abs() < 3.0 * se, "mean {mean:e} g {g:e} se {se:e}");
}

#[test]
fn energy_scales_with_path_gain() {
    let base = Scenario {
        rician_k: 0.0,
        ..Scenario::default()
    };
    let doubled = Scenario {
        reference_gain_db: base.reference_gain_db + 10.0 * 2f64.log10(),
        ..base.clone()
    };
    let energy = |s: &Scenario, offset: u64| -> Vec<f64> {
        (0..4000)
            .map(|k| nominal_channel::<f64>(s, offset + k).unwrap().h_b.frobenius_sq())
            .collect()
    };
    let (m1, se1) = mean_and_se(&energy(&base, 0));
    let (m2, se2) = mean_and_se(&energy(&doubled, 100_000));
    let diff = m2 - 2.0 * m1;
    let se = (se2 * se2 + 4.0 * se1 * se1).sqrt();
    assert!(diff.abs() < 3.0 * se, "{m1:e} {m2:e}");
}

#[test]
fn coincident_positions_fail() {
    let s = Scenario {
        uav_position: [0.0, 0.0, 10.0],
        ..Scenario::default()
    };
    assert!(matches!(nominal_channel::<f64>(&s, 0), Err(Error::Geometry(_))));
}

#[test]
fn zero_uncertainty_is_bit_exact() {
    let s = Scenario::default();
    let nominal = nominal_channel::<f64>(&s, 5).unwrap();
    let out = perturb(&nominal, &s, &UncertaintyModel::none(), 9).unwrap();
    assert_eq!(out, nominal);
}

#[test]
fn perturbation_is_deterministic_and_nontrivial() {
    let s = Scenario::default();
    let nominal = nominal_channel::<f64>(&s, 5).unwrap();
    let u = UncertaintyModel::default();
    let a = perturb(&nominal, &s, &u, 11).unwrap();
    assert_eq!(a, perturb(&nominal, &s, &u, 11).unwrap());
    assert_ne!(a, nominal);
    assert_ne!(a, perturb(&nominal, &s, &u, 12).unwrap());
}

#[test]
fn csi_error_energy_matches_sigma_squared() {
    let s = Scenario::default();
    let nominal = nominal_channel::<f64>(&s, 1).unwrap();
    let u = UncertaintyModel {
        csi_error_sigma: 0.1,
        ..UncertaintyModel::none()
    };
    let (mut rb, mut re) = (Vec::new(), Vec::new());
    for seed in 0..10_000 {
        let p = perturb(&nominal, &s, &u, seed).unwrap();
        rb.push(p.h_b.sub(&nominal.h_b).unwrap().frobenius_sq() / nominal.h_b.frobenius_sq());
        re.push(p.h_e.sub(&nominal.h_e).unwrap().frobenius_sq() / nominal.h_e.frobenius_sq());
    }
    let (m, se) = mean_and_se(&rb);
    assert!((m - 0.01).abs() < 3.0 * se, "{m} {se}");
    // eavesdropper sigma is doubled
    let (m, se) = mean_and_se(&re);
    assert!((m - 0.04).abs() < 3.0 * se, "{m} {se}");
}

#[test]
fn angles_follow_spherical_convention() {
    let a = link_angles([0.0, 0.0, 0.0], [0.0, 0.0, 5.0]).unwrap();
    assert_eq!(a.elevation, 0.0);
    let a = link_angles([0.0, 0.0, 0.0], [0.0, 3.0, 0.0]).unwrap();
    assert!((a.elevation - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    assert!((a.azimuth - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    assert!((a.arrival - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
}

#[test]
fn single_precision_channels() {
    let s = Scenario::default();
    let a = nominal_channel::<f32>(&s, 3).unwrap();
    let b = nominal_channel::<f64>(&s, 3).unwrap();
    let rel = (a.h_b.frobenius_sq() as f64 / b.h_b.frobenius_sq() - 1.0).abs();
    assert!(rel < 1e-5);
}
