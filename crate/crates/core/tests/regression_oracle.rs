//! Zero-intercept least squares against an exact rational normal-equations oracle.

mod common;

use crossmap::regress::{hierarchical_fit_steps, ols_no_intercept};
use crossmap::{load_matrix, RegressionDataset, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use common::{fixture, normal_equations};

fn random_system(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<Vec<f64>>) {
    let p = rng.random_range(1..=3);
    let n = rng.random_range(p + 1..=50);
    let x: Vec<Vec<f64>> = (0..p)
        .map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    let beta: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
    let y = (0..n)
        .map(|i| {
            let signal: f64 = (0..p).map(|j| beta[j] * x[j][i]).sum();
            signal + 0.5 * rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    (y, x)
}

#[test]
fn matches_rational_oracle_on_200_random_systems() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    for case in 0..200 {
        let (y, x) = random_system(&mut rng);
        let cols: Vec<&[f64]> = x.iter().map(Vec::as_slice).collect();
        let fit = ols_no_intercept(&y, &cols).unwrap();
        let (beta, r2) = normal_equations(&y, &x);
        assert!(fit.dropped.is_empty(), "case {case}: unexpected drop");
        for (j, (a, b)) in fit.coefficients.iter().zip(&beta).enumerate() {
            assert!((a - b).abs() < 1e-10, "case {case} coef {j}: {a} vs {b}");
        }
        assert!((fit.r2 - r2).abs() < 1e-10, "case {case}: r2 {} vs {r2}", fit.r2);
    }
}

#[test]
fn hierarchical_sequence_is_monotone_and_telescopes() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0002);
    for case in 0..200 {
        let (y, x) = random_system(&mut rng);
        let p = x.len();
        let data = RegressionDataset {
            target_ref: 1,
            response: y.clone(),
            predictors: x.clone(),
            predictor_refs: (1..=p).collect(),
        };
        let steps: Vec<usize> = (1..=p).collect();
        let res = hierarchical_fit_steps(&data, &steps).unwrap();
        assert!(res.r2.windows(2).all(|w| w[0] <= w[1]), "case {case}");
        assert!(res.r2[0] >= 0.0 && *res.r2.last().unwrap() <= 1.0);
        let folded = res.increments.iter().fold(0.0, |a, b| a + b);
        assert_eq!(folded, *res.r2.last().unwrap(), "case {case}");
        for k in 0..p {
            let prefix: Vec<Vec<f64>> = x[..=k].to_vec();
            let (_, r2) = normal_equations(&y, &prefix);
            assert!((res.r2[k] - r2).abs() < 1e-10, "case {case} step {k}");
        }
    }
}

#[test]
fn fixture_8x2_system_matches_oracle() {
    let m = load_matrix(fixture("ccss_unit_test_8x5.csv"), Side::Standard).unwrap();
    let y = m.column(0).to_vec();
    let x = vec![m.column(1).to_vec(), m.column(2).to_vec()];
    let fit = ols_no_intercept(&y, &[&x[0], &x[1]]).unwrap();
    let (beta, r2) = normal_equations(&y, &x);
    assert!((fit.coefficients[0] - beta[0]).abs() < 1e-10);
    assert!((fit.coefficients[1] - beta[1]).abs() < 1e-10);
    assert!((fit.r2 - r2).abs() < 1e-10);
}

#[test]
fn single_unit_predictor_r2_is_squared_dot() {
    let m = load_matrix(fixture("ccss_unit_test_8x5.csv"), Side::Standard).unwrap();
    for a in 0..5 {
        for b in 0..5 {
            if a == b {
                continue;
            }
            let (y, x) = (m.column(a), m.column(b));
            let fit = ols_no_intercept(y, &[x]).unwrap();
            let dot: f64 = y.iter().zip(x).map(|(u, v)| u * v).sum();
            assert!((fit.r2 - dot * dot).abs() < 1e-12);
        }
    }
}

#[test]
fn oracle_is_exact_on_an_integer_system() {
    // y = 2*x1 - x2 exactly, so the oracle must return beta = (2, -1), r2 = 1.
    let x = vec![vec![1.0, 2.0, 3.0, 4.0], vec![1.0, 0.0, 1.0, 0.0]];
    let y: Vec<f64> = (0..4).map(|i| 2.0 * x[0][i] - x[1][i]).collect();
    let (beta, r2) = normal_equations(&y, &x);
    assert_eq!(beta, vec![2.0, -1.0]);
    assert_eq!(r2, 1.0);
}
