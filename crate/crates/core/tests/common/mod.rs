#![allow(dead_code)]

use std::path::PathBuf;

use crossmap::report::CrosswalkTable;
use crossmap::{
    hierarchical_fit, load_corpus, load_matrix_for, make_dataset, select_top_k, Corpus,
    EmbeddingMatrix, ForestConfig, RegressionDataset, Side,
};
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn fixture(name: &str) -> PathBuf {
    root().join("fixtures").join(name)
}

pub fn ccss() -> Corpus {
    load_corpus(root().join("data/ccss_g4_math.json"), Side::Standard).unwrap()
}

pub fn naep() -> Corpus {
    load_corpus(root().join("data/naep_g4_math.json"), Side::Specification).unwrap()
}

pub fn published_table() -> CrosswalkTable {
    CrosswalkTable::load_csv(fixture("table1_published.csv")).unwrap()
}

fn exact(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite")
}

/// Solves XᵀX β = Xᵀy in exact rational arithmetic and returns β and the
/// uncentered R² = βᵀXᵀy / yᵀy, both rounded to f64 at the end.
pub fn normal_equations(y: &[f64], x: &[Vec<f64>]) -> (Vec<f64>, f64) {
    let p = x.len();
    let yq: Vec<BigRational> = y.iter().map(|&v| exact(v)).collect();
    let xq: Vec<Vec<BigRational>> = x
        .iter()
        .map(|c| c.iter().map(|&v| exact(v)).collect())
        .collect();
    let dot = |a: &[BigRational], b: &[BigRational]| {
        a.iter()
            .zip(b)
            .fold(BigRational::zero(), |acc, (u, v)| acc + u * v)
    };
    // Augmented system [XᵀX | Xᵀy].
    let mut m: Vec<Vec<BigRational>> = (0..p)
        .map(|i| {
            let mut row: Vec<BigRational> = (0..p).map(|j| dot(&xq[i], &xq[j])).collect();
            row.push(dot(&xq[i], &yq));
            row
        })
        .collect();
    for col in 0..p {
        let pivot = (col..p)
            .find(|&r| !m[r][col].is_zero())
            .expect("oracle requires full column rank");
        m.swap(col, pivot);
        let lead = m[col][col].clone();
        for v in m[col].iter_mut() {
            *v = &*v / &lead;
        }
        for r in 0..p {
            if r != col && !m[r][col].is_zero() {
                let factor = m[r][col].clone();
                #[allow(clippy::needless_range_loop)]
                for c in col..=p {
                    let sub = &factor * &m[col][c];
                    m[r][c] = &m[r][c] - sub;
                }
            }
        }
    }
    let beta: Vec<BigRational> = m.iter().map(|row| row[p].clone()).collect();
    let xty: Vec<BigRational> = xq.iter().map(|c| dot(c, &yq)).collect();
    let explained = dot(&beta, &xty);
    let r2 = explained / dot(&yq, &yq);
    (
        beta.iter().map(|b| b.to_f64().unwrap()).collect(),
        r2.to_f64().unwrap(),
    )
}

/// y = 2·x_a + ε with independent standard-normal predictors; the noise scale
/// gives a signal-to-noise variance ratio of `snr`.
pub fn planted_signal(
    seed: u64,
    n: usize,
    p: usize,
    planted: usize,
    snr: f64,
) -> RegressionDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let predictors: Vec<Vec<f64>> = (0..p)
        .map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    let noise_sd = (4.0 / snr).sqrt();
    let response = (0..n)
        .map(|i| 2.0 * predictors[planted][i] + noise_sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    RegressionDataset {
        target_ref: 1,
        response,
        predictors,
        predictor_refs: (1..=p).collect(),
    }
}

pub fn read_reference(name: &str) -> Vec<(String, f64)> {
    std::fs::read_to_string(fixture(name))
        .unwrap()
        .lines()
        .filter_map(|l| {
            let mut it = l.split_whitespace();
            Some((it.next()?.to_string(), it.next()?.parse().ok()?))
        })
        .collect()
}

/// Names the directory holding the archived study embeddings (`ccss.csv`, 3000×34,
/// and `naep.csv`, 3000×49). Not shipped with the repository.
pub const STUDY_ENV: &str = "CROSSMAP_STUDY_EMBEDDINGS";

pub fn study_matrices() -> Result<(EmbeddingMatrix, EmbeddingMatrix), String> {
    let dir = std::env::var_os(STUDY_ENV)
        .map(PathBuf::from)
        .ok_or_else(|| format!("{STUDY_ENV} is not set; no archived study embeddings available"))?;
    let std = load_matrix_for(dir.join("ccss.csv"), &ccss()).map_err(|e| e.to_string())?;
    let spec = load_matrix_for(dir.join("naep.csv"), &naep()).map_err(|e| e.to_string())?;
    Ok((std, spec))
}

pub struct Characterization {
    pub step1_agreement: f64,
    pub r2_agreement: f64,
}

/// Runs selection and regression for every standard with the default forest
/// config and compares against the published table.
pub fn characterize(std: &EmbeddingMatrix, spec: &EmbeddingMatrix) -> Characterization {
    let published = published_table();
    let cfg = ForestConfig::default();
    let mut step1 = 0;
    let mut r2_ok = 0;
    for row in &published.rows {
        let want = &row.result;
        let data = make_dataset(std, spec, want.target_ref).unwrap();
        let ranking = select_top_k(&data, &cfg).unwrap();
        let got = hierarchical_fit(&data, &ranking).unwrap();
        if got.steps[0] == want.steps[0] {
            step1 += 1;
        }
        if got.r2.iter().zip(&want.r2).all(|(a, b)| (a - b).abs() <= 0.05) {
            r2_ok += 1;
        }
    }
    let n = published.len() as f64;
    Characterization {
        step1_agreement: step1 as f64 / n,
        r2_agreement: r2_ok as f64 / n,
    }
}
