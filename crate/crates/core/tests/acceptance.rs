//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits nonzero if any criterion fails.
//!
//! Run with `cargo test -p ecogame --test acceptance -- --nocapture`
//! (the harness is disabled, so output is always shown).

#![allow(clippy::needless_range_loop)]

use std::collections::BTreeSet;
use std::time::Instant;

use ecogame::data::{compute_points, DayBaseline, GameConfig, Resource};
use ecogame::deep::{
    grad_check, make_windows, train_bilstm, BiLstmArch, Likelihood, LstmConfig, MlpArch, VaeArch,
    Window,
};
use ecogame::eval::{
    delta_percent, dtw, dtw_permutation_test, roc_auc, two_sample_ttest, PermutationScheme,
};
use ecogame::explain::{granger_test, lasso_cd, neighborhood_glasso, GlassoConfig, LassoProblem};
use ecogame::features::{mrmr_select, smote, ColumnMeta, ColumnTag, FeatureMatrix};
use ecogame::learners::{
    predict_proba, train_baseline_classifier, LearnerConfig, LearnerKind, ModelParams,
};
use ecogame::pipeline::{run_pipeline, PipelineOptions, RunConfig};
use ecogame::sim::{
    bayes_optimal_auc, simulate_occupant, ExogenousModel, OccupantProfile, ResourceUtility,
};
use ecogame::{seeded_rng, Rng};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, StudentsT};

const POINTS_TOL: f64 = 1e-12;
const LASSO_GRID_TOL: f64 = 1e-4;
const LASSO_OLS_TOL: f64 = 1e-6;
const GLASSO_MIN_RATE: f64 = 0.90;
const GRANGER_PLANTED_P: f64 = 1e-3;
const GRANGER_SIZE: (f64, f64) = (0.05, 0.02);
const UTILITY_REL_TOL: f64 = 0.05;
const UTILITY_AUC_GAP: f64 = 0.02;
const LSTM_MIN_AUC: f64 = 0.95;
const MEMORYLESS_AUC: (f64, f64) = (0.50, 0.05);
const GRAD_TOL: f64 = 1e-4;
const DTW_TOL: f64 = 1e-12;
const DTW_PLANTED_P: f64 = 0.05;
const WELCH_TOL: f64 = 1e-10;
const MRMR_MIN_RATE: f64 = 0.95;
const SEGMENT_TOL: f64 = 1e-9;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn matrix(cols: Vec<Vec<f64>>) -> FeatureMatrix {
    let meta = (0..cols.len())
        .map(|j| ColumnMeta::new(format!("x{j}"), ColumnTag::External))
        .collect();
    FeatureMatrix::from_columns(cols, meta, None).expect("well-formed matrix")
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn points_engine() -> Outcome {
    let mut rng = seeded_rng(101);
    let mut worst = 0.0f64;
    let mut negatives = 0;
    for _ in 0..1000 {
        let b = rng.random_range(1.0..1500.0);
        // up to three times the baseline, so a third of the cases overconsume
        let u = rng.random_range(0.0..3.0 * b);
        let s = rng.random_range(0.1..50.0);
        let got = compute_points(b, u, s).map_err(|e| e.to_string())?;
        let expected = s - s * u / b;
        if expected < 0.0 {
            negatives += 1;
        }
        worst = worst.max((got - expected).abs());
    }
    check(
        worst <= POINTS_TOL && negatives > 0,
        format!("max |error| {worst:.2e} over 1000 cases ({negatives} overconsumption)"),
    )
}

/// Minimizes `(1/2N)||y - Xb||^2 + lambda ||b||_1` over a shrinking grid.
fn grid_lasso(
    gram: &[[f64; 3]; 3],
    xty: &[f64; 3],
    yty: f64,
    n: f64,
    lambda: f64,
    center: [f64; 3],
    radius: f64,
) -> [f64; 3] {
    let objective = |b: &[f64; 3]| {
        let mut quad = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                quad += b[i] * gram[i][j] * b[j];
            }
        }
        let lin: f64 = (0..3).map(|i| b[i] * xty[i]).sum();
        (yty - 2.0 * lin + quad) / (2.0 * n) + lambda * b.iter().map(|v| v.abs()).sum::<f64>()
    };
    let steps = 10i32;
    let mut best = center;
    let mut radius = radius;
    while radius > 1e-7 {
        let c = best;
        let mut best_val = objective(&c);
        for i in -steps..=steps {
            for j in -steps..=steps {
                for k in -steps..=steps {
                    let h = radius / f64::from(steps);
                    let b = [
                        c[0] + f64::from(i) * h,
                        c[1] + f64::from(j) * h,
                        c[2] + f64::from(k) * h,
                    ];
                    let v = objective(&b);
                    if v < best_val {
                        best_val = v;
                        best = b;
                    }
                }
            }
        }
        radius *= 0.5;
    }
    best
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> [f64; 3] {
    let det = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(a);
    let mut out = [0.0; 3];
    for (c, o) in out.iter_mut().enumerate() {
        let mut m = a;
        for r in 0..3 {
            m[r][c] = b[r];
        }
        *o = det(m) / d;
    }
    out
}

fn lasso_oracle() -> Outcome {
    let mut worst_grid = 0.0f64;
    let mut worst_ols = 0.0f64;
    let mut nonzero_above_max = 0;
    for seed in 0..20u64 {
        let mut rng = seeded_rng(200 + seed);
        let n = 60;
        let cols: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..n).map(|_| normal(&mut rng)).collect())
            .collect();
        let truth = [1.5, -0.7, 0.0];
        let y: Vec<f64> = (0..n)
            .map(|i| (0..3).map(|j| truth[j] * cols[j][i]).sum::<f64>() + 0.5 * normal(&mut rng))
            .collect();
        let mut gram = [[0.0; 3]; 3];
        let mut xty = [0.0; 3];
        for i in 0..3 {
            for j in 0..3 {
                gram[i][j] = (0..n).map(|r| cols[i][r] * cols[j][r]).sum();
            }
            xty[i] = (0..n).map(|r| cols[i][r] * y[r]).sum();
        }
        let yty: f64 = y.iter().map(|v| v * v).sum();
        let nf = n as f64;
        let lambda_max = xty.iter().map(|v| v.abs()).fold(0.0, f64::max) / nf;

        let lambda = lambda_max * (0.05 + 0.04 * seed as f64);
        let fit = lasso_cd(&LassoProblem::new(y.clone(), cols.clone(), lambda))
            .map_err(|e| e.to_string())?;
        let oracle = grid_lasso(&gram, &xty, yty, nf, lambda, [0.0; 3], 4.0);
        for j in 0..3 {
            worst_grid = worst_grid.max((fit.beta[j] - oracle[j]).abs());
        }

        let ols = solve3(gram, xty);
        let fit0 = lasso_cd(&LassoProblem::new(y.clone(), cols.clone(), 0.0))
            .map_err(|e| e.to_string())?;
        for j in 0..3 {
            worst_ols = worst_ols.max((fit0.beta[j] - ols[j]).abs());
        }

        for factor in [1.0, 1.5] {
            let fit = lasso_cd(&LassoProblem::new(
                y.clone(),
                cols.clone(),
                factor * lambda_max,
            ))
            .map_err(|e| e.to_string())?;
            if fit.beta.iter().any(|&b| b != 0.0) {
                nonzero_above_max += 1;
            }
        }
    }
    check(
        worst_grid <= LASSO_GRID_TOL && worst_ols <= LASSO_OLS_TOL && nonzero_above_max == 0,
        format!("grid gap {worst_grid:.2e}, OLS gap {worst_ols:.2e}, nonzero fits at lambda >= lambda_max: {nonzero_above_max}"),
    )
}

fn graph_recovery() -> Outcome {
    let chain: BTreeSet<(usize, usize)> = (0..4).map(|i| (i, i + 1)).collect();
    let runs = 20;
    let (mut chain_hits, mut empty_hits) = (0, 0);
    for seed in 0..runs {
        let mut rng = seeded_rng(300 + seed);
        let n = 2000;
        let rho: f64 = 0.5;
        let mut cols = vec![vec![0.0; n]; 5];
        for i in 0..n {
            cols[0][i] = normal(&mut rng);
            for h in 1..5 {
                cols[h][i] = rho * cols[h - 1][i] + (1.0 - rho * rho).sqrt() * normal(&mut rng);
            }
        }
        let g = neighborhood_glasso(&matrix(cols), &GlassoConfig::default())
            .map_err(|e| e.to_string())?;
        if g.edges == chain {
            chain_hits += 1;
        }
        let independent: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..n).map(|_| normal(&mut rng)).collect())
            .collect();
        let g = neighborhood_glasso(&matrix(independent), &GlassoConfig::default())
            .map_err(|e| e.to_string())?;
        if g.edges.is_empty() {
            empty_hits += 1;
        }
    }
    let (a, b) = (
        chain_hits as f64 / runs as f64,
        empty_hits as f64 / runs as f64,
    );
    check(
        a >= GLASSO_MIN_RATE && b >= GLASSO_MIN_RATE,
        format!("exact chain {chain_hits}/{runs}, empty graph on independent columns {empty_hits}/{runs}"),
    )
}

fn granger_correctness() -> Outcome {
    let mut planted_ok = 0;
    let mut worst_p = 0.0f64;
    for seed in 0..50 {
        let mut rng = seeded_rng(400 + seed);
        let n = 1000;
        let x: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        let mut y = vec![0.0; n];
        for t in 1..n {
            y[t] = 0.5 * x[t - 1] + normal(&mut rng);
        }
        let r = granger_test(&x, &y, 1, 0.05).map_err(|e| e.to_string())?;
        worst_p = worst_p.max(r.p_value);
        if r.p_value < GRANGER_PLANTED_P {
            planted_ok += 1;
        }
    }
    let runs = 1000;
    let mut rejected = 0;
    for seed in 0..runs {
        let mut rng = seeded_rng(10_000 + seed);
        let n = 200;
        let x: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        let y: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        if granger_test(&x, &y, 2, 0.05)
            .map_err(|e| e.to_string())?
            .reject
        {
            rejected += 1;
        }
    }
    let size = rejected as f64 / runs as f64;
    check(
        planted_ok == 50 && (size - GRANGER_SIZE.0).abs() <= GRANGER_SIZE.1,
        format!("planted rejected {planted_ok}/50 (max p {worst_p:.1e}), null size {size:.3}"),
    )
}

fn logit_profile(beta: &[f64]) -> OccupantProfile {
    OccupantProfile {
        occupant_id: "u1".into(),
        features: ["intercept", "syn_0", "syn_1", "syn_2"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        resources: vec![ResourceUtility::binary(Resource::DeskLight, beta.to_vec())],
        gumbel_scale: 1.0,
        lag_order: 0,
        portal_visit_rate: 0.0,
    }
}

fn simulated_design(
    profile: &OccupantProfile,
    exo_seed: u64,
    horizon: usize,
    sim_seed: u64,
) -> Result<(FeatureMatrix, Vec<u8>, f64), String> {
    let mut exo = ExogenousModel::tropical(
        chrono::NaiveDate::from_ymd_opt(2017, 9, 12).unwrap(),
        exo_seed,
    );
    exo.synthetic_covariates = 3;
    let game = GameConfig {
        baselines: [(
            Resource::DeskLight,
            DayBaseline {
                weekday: 600.0,
                weekend: 600.0,
            },
        )]
        .into(),
        boosters: [(Resource::DeskLight, 10.0)].into(),
        pre_game_range: None,
        calendar: Default::default(),
    };
    let table = simulate_occupant(profile, &exo, horizon, &game, &mut seeded_rng(sim_seed))
        .map_err(|e| e.to_string())?;
    let cols: Vec<Vec<f64>> = (0..3)
        .map(|j| {
            table
                .records()
                .iter()
                .map(|r| r.extra[&format!("syn_{j}")])
                .collect()
        })
        .collect();
    let y: Vec<u8> = table
        .records()
        .iter()
        .map(|r| u8::from(r.state(Resource::DeskLight)))
        .collect();
    let bayes =
        bayes_optimal_auc(profile, &exo, &table, Resource::DeskLight).map_err(|e| e.to_string())?;
    Ok((matrix(cols), y, bayes))
}

fn utility_recovery() -> Outcome {
    let beta = [-0.8, 1.2, -1.0, 0.9];
    let profile = logit_profile(&beta);
    let (x, y, _) = simulated_design(&profile, 51, 50_000, 52)?;
    let model = train_baseline_classifier(
        LearnerKind::Logistic,
        &x,
        &y,
        &LearnerConfig::default(),
        &mut seeded_rng(53),
    )
    .map_err(|e| e.to_string())?;
    let ModelParams::Linear(lin) = &model.params else {
        return Err("logistic model is not linear".into());
    };
    let learned: Vec<f64> = std::iter::once(lin.bias)
        .chain(lin.weights.iter().copied())
        .collect();
    let worst_rel = learned
        .iter()
        .zip(&beta)
        .map(|(l, b)| ((l - b) / b).abs())
        .fold(0.0, f64::max);

    let (xt, yt, bayes) = simulated_design(&profile, 61, 20_000, 62)?;
    let scores = predict_proba(&model, &xt).map_err(|e| e.to_string())?;
    let auc = roc_auc(&scores, &yt).map_err(|e| e.to_string())?.auc;
    check(
        worst_rel <= UTILITY_REL_TOL && (auc - bayes).abs() <= UTILITY_AUC_GAP,
        format!(
            "max relative coefficient error {:.2}%, test AUC {auc:.4} vs Bayes {bayes:.4}",
            100.0 * worst_rel
        ),
    )
}

fn lag3_series(n: usize, seed: u64) -> (FeatureMatrix, Vec<u8>) {
    let mut rng = seeded_rng(seed);
    let x: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
    let y: Vec<u8> = (0..n).map(|t| u8::from(t >= 3 && x[t - 3] > 0.0)).collect();
    (matrix(vec![x]), y)
}

fn sequence_advantage() -> Outcome {
    let (x, y) = lag3_series(3000, 71);
    let (xt, yt) = lag3_series(1000, 72);
    let logistic = train_baseline_classifier(
        LearnerKind::Logistic,
        &x,
        &y,
        &LearnerConfig::default(),
        &mut seeded_rng(73),
    )
    .map_err(|e| e.to_string())?;
    let memoryless = roc_auc(
        &predict_proba(&logistic, &xt).map_err(|e| e.to_string())?,
        &yt,
    )
    .map_err(|e| e.to_string())?
    .auc;

    let window = 6;
    let cfg = LstmConfig {
        window,
        layers: 1,
        width: 6,
        fc_width: 4,
        dropout: 0.0,
        learning_rate: 0.1,
        patience: 8,
        max_epochs: 30,
        batch_size: Some(16),
        ..LstmConfig::default()
    };
    let train = make_windows(&x, &y, window).map_err(|e| e.to_string())?;
    let test = make_windows(&xt, &yt, window).map_err(|e| e.to_string())?;
    let model = train_bilstm(&train, &cfg, &mut seeded_rng(74)).map_err(|e| e.to_string())?;
    let labels: Vec<u8> = test.iter().map(|w| w.label).collect();
    let lstm = roc_auc(
        &model.predict_windows(&test).map_err(|e| e.to_string())?,
        &labels,
    )
    .map_err(|e| e.to_string())?
    .auc;
    check(
        lstm >= LSTM_MIN_AUC && (memoryless - MEMORYLESS_AUC.0).abs() <= MEMORYLESS_AUC.1,
        format!("BiLSTM test AUC {lstm:.4}, memoryless logistic {memoryless:.4}"),
    )
}

fn gradient_integrity() -> Outcome {
    let mut rng = seeded_rng(81);
    let rows: Vec<Vec<f64>> = (0..10)
        .map(|_| (0..3).map(|_| normal(&mut rng)).collect())
        .collect();
    let row_refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    let targets: Vec<f64> = rows
        .iter()
        .map(|r| f64::from(u8::from(r[0] + r[1] > 0.0)))
        .collect();

    let mut mlp_err = 0.0f64;
    for (batch_norm, dropout) in [(false, 0.0), (false, 0.3), (true, 0.0)] {
        let arch = MlpArch::new(3, &[5, 4], batch_norm);
        let mut params = arch.init(&mut rng);
        params.iter_mut().for_each(|p| *p += 0.05);
        let f = |p: &[f64]| arch.loss_grad(p, &row_refs, &targets, dropout, &mut seeded_rng(82));
        mlp_err = mlp_err.max(grad_check(&params, f, 1e-6, None, &mut rng));
    }

    let arch = BiLstmArch {
        inputs: 3,
        width: 4,
        layers: 2,
        fc_width: 3,
    };
    let windows: Vec<Window> = (0..4)
        .map(|k| Window {
            values: (0..5 * 3).map(|_| normal(&mut rng)).collect(),
            len: 5,
            n_cols: 3,
            label: (k % 2) as u8,
            end: k,
        })
        .collect();
    let batch: Vec<&Window> = windows.iter().collect();
    let params = arch.init(&mut rng);
    let mut lstm_err = 0.0f64;
    for dropout in [0.0, 0.4] {
        let f = |p: &[f64]| arch.loss_grad(p, &batch, [0.8, 1.3], dropout, &mut seeded_rng(83));
        lstm_err = lstm_err.max(grad_check(&params, f, 1e-6, None, &mut rng));
    }

    let likelihoods = vec![
        Likelihood::Gaussian,
        Likelihood::Bernoulli,
        Likelihood::Gaussian,
    ];
    let vae_rows: Vec<Vec<f64>> = (0..6)
        .map(|i| vec![normal(&mut rng), f64::from((i % 2) as u8), normal(&mut rng)])
        .collect();
    let vae_refs: Vec<&[f64]> = vae_rows.iter().map(Vec::as_slice).collect();
    let arch = VaeArch::new(likelihoods, [5, 4], [4, 5], 2);
    let params = arch.init(&mut rng);
    let eps: Vec<Vec<f64>> = (0..vae_rows.len())
        .map(|_| (0..2).map(|_| normal(&mut rng)).collect())
        .collect();
    let f = |p: &[f64]| {
        let (loss, g) = arch.loss_grad(p, &vae_refs, &eps);
        (loss.total, g)
    };
    let vae_err = grad_check(&params, f, 1e-6, None, &mut rng);

    check(
        mlp_err < GRAD_TOL && lstm_err < GRAD_TOL && vae_err < GRAD_TOL,
        format!("max relative error: mlp {mlp_err:.1e}, bilstm {lstm_err:.1e}, vae {vae_err:.1e}"),
    )
}

fn dtw_and_permutation() -> Outcome {
    let mut rng = seeded_rng(91);
    let mut worst_self = 0.0f64;
    let mut worst_sym = 0.0f64;
    for _ in 0..100 {
        let la = rng.random_range(1..40);
        let lb = rng.random_range(1..40);
        let a: Vec<f64> = (0..la).map(|_| normal(&mut rng)).collect();
        let b: Vec<f64> = (0..lb).map(|_| normal(&mut rng)).collect();
        worst_self = worst_self.max(dtw(&a, &a).map_err(|e| e.to_string())?.abs());
        let ab = dtw(&a, &b).map_err(|e| e.to_string())?;
        let ba = dtw(&b, &a).map_err(|e| e.to_string())?;
        worst_sym = worst_sym.max((ab - ba).abs());
    }
    let flat = vec![0.0; 300];
    let constant =
        dtw_permutation_test(&flat, &flat, 100, PermutationScheme::WithinSeries, &mut rng)
            .map_err(|e| e.to_string())?;
    let original: Vec<f64> = (0..200)
        .map(|t| (2.0 * std::f64::consts::PI * t as f64 / 50.0).sin())
        .collect();
    let generated: Vec<f64> = (0..200)
        .map(|t| {
            (2.0 * std::f64::consts::PI * (t + 3) as f64 / 50.0).sin() + 0.05 * normal(&mut rng)
        })
        .collect();
    let planted = dtw_permutation_test(
        &original,
        &generated,
        200,
        PermutationScheme::WithinSeries,
        &mut rng,
    )
    .map_err(|e| e.to_string())?;
    check(
        worst_self <= DTW_TOL
            && worst_sym <= DTW_TOL
            && constant.statistic == 0.0
            && constant.p_value == 1.0
            && planted.p_value < DTW_PLANTED_P,
        format!(
            "self {worst_self:.1e}, asymmetry {worst_sym:.1e}, constant pair DTW {} p {}, sinusoid p {}",
            constant.statistic, constant.p_value, planted.p_value
        ),
    )
}

fn statistics_oracles() -> Outcome {
    let mut rng = seeded_rng(111);
    let mut auc_mismatch = 0;
    let mut sets = 0;
    while sets < 100 {
        let n = rng.random_range(4..30);
        let scores: Vec<f64> = (0..n)
            .map(|_| (rng.random::<f64>() * 10.0).round() / 10.0)
            .collect();
        let labels: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<bool>())).collect();
        let pos: Vec<f64> = scores
            .iter()
            .zip(&labels)
            .filter(|(_, &l)| l == 1)
            .map(|(s, _)| *s)
            .collect();
        let neg: Vec<f64> = scores
            .iter()
            .zip(&labels)
            .filter(|(_, &l)| l == 0)
            .map(|(s, _)| *s)
            .collect();
        if pos.is_empty() || neg.is_empty() {
            continue;
        }
        sets += 1;
        let mut halves = 0usize;
        for p in &pos {
            for q in &neg {
                halves += match p.partial_cmp(q).unwrap() {
                    std::cmp::Ordering::Greater => 2,
                    std::cmp::Ordering::Equal => 1,
                    std::cmp::Ordering::Less => 0,
                };
            }
        }
        let expected = halves as f64 / (2 * pos.len() * neg.len()) as f64;
        if roc_auc(&scores, &labels).map_err(|e| e.to_string())?.auc != expected {
            auc_mismatch += 1;
        }
    }

    let mut worst_welch = 0.0f64;
    for _ in 0..50 {
        let n1 = rng.random_range(2..40);
        let n2 = rng.random_range(2..40);
        let a: Vec<f64> = (0..n1).map(|_| 3.0 * normal(&mut rng) + 1.0).collect();
        let b: Vec<f64> = (0..n2).map(|_| normal(&mut rng)).collect();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let var = |v: &[f64]| {
            let m = mean(v);
            v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
        };
        let (va, vb) = (var(&a) / n1 as f64, var(&b) / n2 as f64);
        let t = (mean(&a) - mean(&b)) / (va + vb).sqrt();
        let df = (va + vb).powi(2) / (va * va / (n1 - 1) as f64 + vb * vb / (n2 - 1) as f64);
        let p = 2.0 * StudentsT::new(0.0, 1.0, df).unwrap().cdf(-t.abs());
        let got = two_sample_ttest(&a, &b).map_err(|e| e.to_string())?;
        worst_welch = worst_welch
            .max((got.statistic - t).abs())
            .max((got.p_value - p).abs());
    }

    let delta = delta_percent(402.2, 157.5).ok_or("undefined delta")?;
    let rounded = (delta * 10.0).round() / 10.0;
    check(
        auc_mismatch == 0 && worst_welch <= WELCH_TOL && rounded == 60.8,
        format!("AUC mismatches {auc_mismatch}/100, Welch max gap {worst_welch:.1e}, delta% {delta:.3} -> {rounded}"),
    )
}

fn pipeline_determinism() -> Outcome {
    let mut cfg = RunConfig::demo();
    cfg.experiment.resources = vec![Resource::DeskLight, Resource::CeilingFan];
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    run_pipeline(&cfg, a.path(), PipelineOptions::default()).map_err(|e| e.to_string())?;
    run_pipeline(&cfg, b.path(), PipelineOptions::default()).map_err(|e| e.to_string())?;
    let files = [
        "auc_table.csv",
        "auc_table_wide.csv",
        "summary.json",
        "features/desk_light_step_ahead.txt",
        "features/ceiling_fan_sensor_free.txt",
        "roc/logistic_desk_light_step_ahead.csv",
    ];
    let mut differing = Vec::new();
    for f in files {
        let x = std::fs::read(a.path().join(f)).map_err(|e| format!("{f}: {e}"))?;
        let y = std::fs::read(b.path().join(f)).map_err(|e| format!("{f}: {e}"))?;
        if x != y {
            differing.push(f);
        }
    }
    check(
        differing.is_empty(),
        format!(
            "{} report files compared, differing: {differing:?}",
            files.len()
        ),
    )
}

fn smote_and_mrmr() -> Outcome {
    let mut rng = seeded_rng(121);
    let (n_min, n_maj, k) = (150, 1200, 5);
    let mut cols = vec![Vec::new(); 3];
    let mut y = Vec::new();
    for i in 0..n_min + n_maj {
        let minority = i < n_min;
        for c in cols.iter_mut() {
            c.push(normal(&mut rng) + if minority { 2.0 } else { 0.0 });
        }
        y.push(u8::from(minority));
    }
    let x = matrix(cols);
    let (xs, ys) = smote(&x, &y, k, &mut seeded_rng(122)).map_err(|e| e.to_string())?;
    let ones = ys.iter().filter(|&&v| v == 1).count();
    let balanced = ones * 2 == ys.len();
    let preserved = (0..x.n_rows()).all(|i| xs.row(i) == x.row(i) && ys[i] == y[i]);

    let minority: Vec<&[f64]> = (0..x.n_rows())
        .filter(|&i| y[i] == 1)
        .map(|i| x.row(i))
        .collect();
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>();
    let neighbors: Vec<Vec<usize>> = (0..minority.len())
        .map(|i| {
            let mut order: Vec<usize> = (0..minority.len()).filter(|&j| j != i).collect();
            order.sort_by(|&a, &b| {
                dist(minority[i], minority[a]).total_cmp(&dist(minority[i], minority[b]))
            });
            order.truncate(k);
            order
        })
        .collect();
    let on_segment = |s: &[f64]| {
        (0..minority.len()).any(|i| {
            neighbors[i].iter().any(|&j| {
                let (p, q) = (minority[i], minority[j]);
                let d2 = dist(p, q);
                if d2 == 0.0 {
                    return dist(s, p) == 0.0;
                }
                let u = s
                    .iter()
                    .zip(p)
                    .zip(q)
                    .map(|((s, p), q)| (s - p) * (q - p))
                    .sum::<f64>()
                    / d2;
                (-SEGMENT_TOL..=1.0 + SEGMENT_TOL).contains(&u)
                    && s.iter()
                        .zip(p)
                        .zip(q)
                        .all(|((s, p), q)| (s - (p + u * (q - p))).abs() <= SEGMENT_TOL)
            })
        })
    };
    let synthetic: Vec<usize> = (x.n_rows()..xs.n_rows()).take(1000).collect();
    let on = synthetic.iter().filter(|&&i| on_segment(xs.row(i))).count();

    let runs = 50;
    let mut mrmr_hits = 0;
    for seed in 0..runs {
        let mut rng = seeded_rng(1300 + seed);
        let n = 1500;
        let informative: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        let weak: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        let noise: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        let duplicate: Vec<f64> = informative
            .iter()
            .map(|v| v + 0.3 * normal(&mut rng))
            .collect();
        let y: Vec<u8> = (0..n)
            .map(|i| u8::from(informative[i] + 0.5 * weak[i] + 0.3 * normal(&mut rng) > 0.0))
            .collect();
        // the duplicate sits before the informative column so index ties cannot help
        let m = matrix(vec![noise, duplicate, informative, weak]);
        let picked = mrmr_select(&m, &y, 2, 10).map_err(|e| e.to_string())?;
        if picked[0] == 2 && !picked.contains(&1) {
            mrmr_hits += 1;
        }
    }
    check(
        balanced && preserved && synthetic.len() == 1000 && on == synthetic.len() && mrmr_hits as f64 / runs as f64 >= MRMR_MIN_RATE,
        format!(
            "balanced {balanced}, originals kept {preserved}, on-segment {on}/{}, mRMR first-and-skip {mrmr_hits}/{runs}",
            synthetic.len()
        ),
    )
}

/// Informational only: runs a user-supplied configuration over real data.
fn optional_dataset() -> Option<Outcome> {
    let path = std::env::var_os("ECOGAME_ACCEPTANCE_CONFIG")?;
    let run = || -> Outcome {
        let mut cfg = RunConfig::load(std::path::Path::new(&path)).map_err(|e| e.to_string())?;
        cfg.apply_env().map_err(|e| e.to_string())?;
        let out = tempfile::tempdir().map_err(|e| e.to_string())?;
        let report = run_pipeline(&cfg, out.path(), PipelineOptions::default())
            .map_err(|e| e.to_string())?;
        let fan = report.rows.iter().find(|r| {
            r.resource == Resource::CeilingFan
                && r.mode == ecogame::features::FeatureMode::StepAhead
                && r.learner.name() == "logistic"
        });
        Ok(match fan {
            Some(r) => format!(
                "step-ahead logistic ceiling-fan AUC {:.3} (reference 0.83 +/- 0.10: {})",
                r.auc,
                if (r.auc - 0.83).abs() <= 0.10 {
                    "within"
                } else {
                    "outside"
                }
            ),
            None => format!(
                "{} AUC rows written; no step-ahead logistic ceiling-fan cell",
                report.rows.len()
            ),
        })
    };
    Some(run())
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("points engine", points_engine),
        ("lasso oracle equivalence", lasso_oracle),
        ("graph recovery", graph_recovery),
        ("granger correctness", granger_correctness),
        ("utility recovery", utility_recovery),
        ("sequence advantage", sequence_advantage),
        ("gradient integrity", gradient_integrity),
        ("dtw and permutation test", dtw_and_permutation),
        ("statistics oracles", statistics_oracles),
        ("pipeline determinism", pipeline_determinism),
        ("smote and mrmr", smote_and_mrmr),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!(
                "criterion {:>2} {name}: PASS ({detail}) [{secs:.1}s]",
                i + 1
            ),
            Err(detail) => {
                failed += 1;
                println!(
                    "criterion {:>2} {name}: FAIL ({detail}) [{secs:.1}s]",
                    i + 1
                );
            }
        }
    }
    match optional_dataset() {
        None => println!("criterion 12 real dataset: SKIP (set ECOGAME_ACCEPTANCE_CONFIG to run)"),
        Some(Ok(detail)) => println!("criterion 12 real dataset: INFO ({detail})"),
        Some(Err(detail)) => println!("criterion 12 real dataset: INFO (run failed: {detail})"),
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
