mod common;

use common::*;
use loopcodec::codec::Plane;
use loopcodec::eval::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn bd_rate_agrees_with_quadrature_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xBD);
    for case in 0..20 {
        let a = smooth_curve(&mut rng);
        let t = perturbed(&mut rng, &a);
        let got = bd_rate(&to_curve(&a), &to_curve(&t)).unwrap();
        let want = oracle_bd_rate(&a, &t);
        assert!((got - want).abs() <= 0.05, "case {case}: {got} vs {want}");
        let got = bd_psnr(&to_curve(&a), &to_curve(&t)).unwrap();
        let want = oracle_bd_psnr(&a, &t);
        assert!((got - want).abs() <= 0.005, "case {case}: {got} vs {want}");
    }
}

#[test]
fn swap_is_multiplicative_inverse() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5A);
    for _ in 0..20 {
        let a = to_curve(&smooth_curve(&mut rng));
        let b = to_curve(&perturbed(&mut rng, a.points().iter().map(|p| (p.rate, p.psnr)).collect::<Vec<_>>().as_slice()));
        let ab = bd_rate(&a, &b).unwrap();
        let ba = bd_rate(&b, &a).unwrap();
        assert!((ab - (-ba / (1.0 + ba / 100.0))).abs() <= 0.1, "{ab} vs {ba}");
    }
}

#[test]
fn uniform_shifts() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = smooth_curve(&mut rng);
    let ca = to_curve(&a);
    assert!(bd_rate(&ca, &ca).unwrap().abs() <= 1e-9);
    assert_eq!(bd_psnr(&ca, &ca).unwrap(), 0.0);
    let scaled: Vec<_> = a.iter().map(|&(r, p)| (r * 1.10, p)).collect();
    assert!((bd_rate(&ca, &to_curve(&scaled)).unwrap() - 10.0).abs() <= 0.01);
    let up: Vec<_> = a.iter().map(|&(r, p)| (r, p + 1.0)).collect();
    assert!((bd_psnr(&ca, &to_curve(&up)).unwrap() - 1.0).abs() <= 1e-6);
}

#[test]
fn five_point_curves_use_least_squares() {
    let pts = [(2.0, 42.0), (1.2, 39.5), (0.7, 36.8), (0.4, 34.1), (0.2, 31.0)];
    let c = to_curve(&pts);
    assert!(bd_rate(&c, &c).unwrap().abs() < 1e-9);
    let scaled: Vec<_> = pts.iter().map(|&(r, p)| (r * 0.9, p)).collect();
    assert!((bd_rate(&c, &to_curve(&scaled)).unwrap() + 10.0).abs() < 1e-6);
}

proptest! {
    #[test]
    fn psnr_is_symmetric(a in proptest::collection::vec(any::<u8>(), 64), b in proptest::collection::vec(any::<u8>(), 64)) {
        let pa = Plane::new(8, 8, a).unwrap();
        let pb = Plane::new(8, 8, b).unwrap();
        prop_assert_eq!(psnr(&pa, &pb).unwrap(), psnr(&pb, &pa).unwrap());
    }

    #[test]
    fn bpp_is_linear(bits in 0u64..1_000_000, k in 1u64..50, w in 1usize..500, h in 1usize..500) {
        let one = bits_per_pixel(bits, w, h);
        prop_assert!((bits_per_pixel(bits * k, w, h) - k as f64 * one).abs() <= 1e-9 * (k as f64 * one).max(1.0));
    }

    #[test]
    fn report_average_is_row_mean(rows in proptest::collection::vec(proptest::collection::vec(-30.0f64..30.0, 3), 1..12)) {
        let mut r = BdReport::new(vec!["Y".into(), "U".into(), "V".into()]);
        for (i, row) in rows.iter().enumerate() {
            r.push(format!("seq{i}"), row.clone());
        }
        let avg = r.average().unwrap();
        for c in 0..3 {
            let mean = rows.iter().map(|row| row[c]).sum::<f64>() / rows.len() as f64;
            prop_assert!((avg[c] - mean).abs() <= 1e-12);
        }
        prop_assert_eq!(r.to_csv().unwrap().lines().count(), rows.len() + 2);
    }
}
