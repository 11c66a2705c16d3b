use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use stylodrift::stats::{fe_regress, hc3_se, holm_bonferroni, partial_correlation};
use stylodrift::PanelRow;

/// HC3 written out with the full n×n hat matrix.
fn literal_hc3(x: &DMatrix<f64>, e: &[f64], j: usize) -> f64 {
    let n = x.nrows();
    let xtx_inv = (x.transpose() * x).try_inverse().unwrap();
    let hat = x * &xtx_inv * x.transpose();
    let omega = DMatrix::from_fn(n, n, |a, b| {
        if a == b {
            e[a] * e[a] / (1.0 - hat[(a, a)]).powi(2)
        } else {
            0.0
        }
    });
    let v = &xtx_inv * x.transpose() * omega * x * &xtx_inv;
    v[(j, j)].sqrt()
}

#[test]
fn hc3_matches_dense_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..40 {
        let n = rng.random_range(6..=200);
        let k = rng.random_range(1..=4).min(n - 2);
        let x = DMatrix::from_fn(n, k, |_, _| rng.random_range(-2.0..2.0));
        let e: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        for j in 0..k {
            let got = hc3_se(&x, &e, j).unwrap();
            let want = literal_hc3(&x, &e, j);
            assert!((got - want).abs() <= 1e-9 * want.max(1e-12), "{got} vs {want}");
        }
    }
}

#[test]
fn hc3_near_classical_under_homoskedasticity() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let n = 4000;
    let x = DMatrix::from_fn(n, 2, |_, j| if j == 0 { 1.0 } else { noise.sample(&mut rng) });
    let e: Vec<f64> = (0..n).map(|_| noise.sample(&mut rng)).collect();
    let s2 = e.iter().map(|v| v * v).sum::<f64>() / (n - 2) as f64;
    let xtx_inv = (x.transpose() * &x).try_inverse().unwrap();
    let classical = (s2 * xtx_inv[(1, 1)]).sqrt();
    let robust = hc3_se(&x, &e, 1).unwrap();
    assert!((robust / classical - 1.0).abs() < 0.1, "{robust} vs {classical}");
}

fn panel(seed: u64) -> Vec<PanelRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.5).unwrap();
    let cats = ["A", "B", "C"];
    let mut rows = Vec::new();
    for a in 0..30 {
        let effect = rng.random_range(-3.0..3.0);
        for t in 0..12 {
            let post = u8::from(t % 3 != 0);
            let length = rng.random_range(10.0..100.0);
            rows.push(PanelRow {
                author_id: format!("a{a}"),
                category: cats[rng.random_range(0..3)].into(),
                post_llm: post,
                length,
                y: 1.5 * post as f64 - 0.02 * length + effect + noise.sample(&mut rng),
            });
        }
    }
    rows
}

#[test]
fn beta_absorbs_author_and_category_constants() {
    let base = fe_regress(&panel(1)).unwrap();
    let mut shifted = panel(1);
    for r in &mut shifted {
        let a: f64 = r.author_id[1..].parse().unwrap();
        r.y += 10.0 * a + if r.category == "B" { 4.0 } else { 0.0 } + 123.0;
    }
    let moved = fe_regress(&shifted).unwrap();
    assert!((base.beta - moved.beta).abs() < 1e-8);
    assert!((base.gamma - moved.gamma).abs() < 1e-8);
}

#[test]
fn partial_correlation_is_symmetric_and_reduces_to_pearson() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 300;
    let c: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let x: Vec<f64> = c.iter().map(|v| v + rng.random_range(-1.0..1.0)).collect();
    let y: Vec<f64> = c
        .iter()
        .zip(&x)
        .map(|(v, w)| 2.0 * v + 0.3 * w + rng.random_range(-1.0..1.0))
        .collect();
    let (rxy, pxy) = partial_correlation(&x, &y, std::slice::from_ref(&c)).unwrap().unwrap();
    let (ryx, pyx) = partial_correlation(&y, &x, &[c]).unwrap().unwrap();
    assert!((rxy - ryx).abs() < 1e-12 && (pxy - pyx).abs() < 1e-12);

    let (r, _) = partial_correlation(&x, &y, &[]).unwrap().unwrap();
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    assert!((r - sxy / (sxx * syy).sqrt()).abs() < 1e-12);
}

#[test]
fn partial_correlation_removes_shared_control() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let n = 10_000;
    let c: Vec<f64> = (0..n).map(|_| noise.sample(&mut rng)).collect();
    let x: Vec<f64> = c.iter().map(|v| 3.0 * v + noise.sample(&mut rng)).collect();
    let y: Vec<f64> = c.iter().map(|v| -2.0 * v + noise.sample(&mut rng)).collect();
    let (r, _) = partial_correlation(&x, &y, &[c]).unwrap().unwrap();
    assert!(r.abs() < 0.05, "{r}");
}

proptest! {
    #[test]
    fn holm_rejections_are_monotone(
        p in prop::collection::vec(0.0f64..=1.0, 1..12),
        which in 0usize..12,
        factor in 0.0f64..1.0,
    ) {
        let before = holm_bonferroni(&p, 0.05).unwrap();
        let mut lowered = p.clone();
        let i = which % p.len();
        lowered[i] *= factor;
        let after = holm_bonferroni(&lowered, 0.05).unwrap();
        for j in 0..p.len() {
            if before.reject[j] {
                prop_assert!(after.reject[j]);
            }
        }
        prop_assert!(after.adjusted.iter().all(|a| (0.0..=1.0).contains(a)));
    }
}
