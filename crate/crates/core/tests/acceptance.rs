//! Acceptance gate. Prints one PASS/FAIL (or SKIP) line per criterion and
//! exits nonzero if any criterion fails.
//!
//! The dataset reproduction check runs only when `PATCHBLUR_KBD_DIR` points
//! at a local copy of the blur dataset laid out as `sharp/`,
//! `defocused_blurred/`, `motion_blurred/`.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use patchblur::bench::bench_inference;
use patchblur::eval::{cross_validate, make_folds, roc_auc};
use patchblur::features::{
    extract_features, laplacian_map, laplacian_stats, lbp_riu2_codes, nglv, sharpness_map, sobel_maps, tenengrad_mean,
};
use patchblur::filter::gaussian_blur;
use patchblur::gbdt::{train, train_with_history, GbdtModel, Node, TrainParams};
use patchblur::grid::extract_vector_par;
use patchblur::image::{load_gray, scan_dataset};
use patchblur::synth::{corpus, noise_image, texture_image};
use patchblur::{FeatureConfig, FeatureParams, GrayImage, Region, Variant};
use rand::{Rng, SeedableRng};
use rayon::prelude::*;

type Outcome = Result<String, String>;
type Criterion = (&'static str, Box<dyn Fn() -> (Status, String)>);

enum Status {
    Pass,
    Fail,
    Skip,
}

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

/// `max |a - b| / max |b|`; zero when both maps are identically zero.
fn normwise_rel(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let err = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    if err == 0.0 {
        0.0
    } else {
        err / scale
    }
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn feature_oracle() -> Outcome {
    const TOL: f64 = 1e-9;
    let start = Instant::now();
    let p = FeatureParams::default();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    let sources = [noise_image(96, 80, 1), texture_image(96, 80, 2), gaussian_blur(&noise_image(96, 80, 3), 1.5)];
    let mut worst = 0.0f64;
    for i in 0..50 {
        let img = &sources[i % sources.len()];
        let r = Region::new(rng.random_range(0..=img.width() - 32), rng.random_range(0..=img.height() - 32), 32, 32);
        let err = |e: f64, what: &str| -> Result<f64, String> {
            check(e <= TOL, format!("region {i} {r:?}: {what} relative error {e:e}"))?;
            Ok(e)
        };

        let g = sobel_maps(img, r).map_err(|e| e.to_string())?;
        worst = worst.max(err(normwise_rel(&g.sx.data, &common::filter3(img, &r, &common::SOBEL_X)), "sobel x")?);
        worst = worst.max(err(normwise_rel(&g.sy.data, &common::filter3(img, &r, &common::SOBEL_Y)), "sobel y")?);
        let lap = laplacian_map(img, r).map_err(|e| e.to_string())?;
        worst = worst.max(err(normwise_rel(&lap.data, &common::filter3(img, &r, &common::LAPLACE)), "laplacian")?);

        let t = tenengrad_mean(img, r).map_err(|e| e.to_string())?;
        worst = worst.max(err(rel(t, common::tenengrad(img, &r)), "tenengrad")?);
        let ls = laplacian_stats(img, r).map_err(|e| e.to_string())?;
        let (lm, lv) = common::laplacian(img, &r);
        worst = worst.max(err(rel(ls.mean, lm), "laplacian mean")?);
        worst = worst.max(err(rel(ls.variance, lv), "laplacian var")?);
        let n = nglv(img, r, &p).map_err(|e| e.to_string())?;
        worst = worst.max(err(rel(n, common::nglv(img, &r, p.epsilon)), "nglv")?);

        let codes = lbp_riu2_codes(img, r, &p).map_err(|e| e.to_string())?;
        check(codes.codes == common::lbp_codes(img, &r, p.lbp_threshold), format!("region {i}: lbp codes differ"))?;
        let map = sharpness_map(&codes, p.lbp_window).map_err(|e| e.to_string())?;
        check(
            map.data == common::sharpness_map(&codes.codes, 32, 32, p.lbp_window),
            format!("region {i}: sharpness map differs"),
        )?;
        let f = extract_features(img, r, &p, true).map_err(|e| e.to_string())?;
        let (bm, bv) = common::lbp_stats(img, &r, p.lbp_threshold, p.lbp_window);
        worst = worst.max(err(rel(f[4], bm), "lbp mean")?);
        worst = worst.max(err(rel(f[5], bv), "lbp var")?);
    }
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(5), format!("took {elapsed:?} (limit 5 s)"))?;
    Ok(format!("50 regions, worst relative error {worst:.2e}, {:.2} s", elapsed.as_secs_f64()))
}

fn constant_zeros() -> Outcome {
    let p = FeatureParams::default();
    for v in [0.0, 0.25, 0.5, 0.731, 1.0] {
        for (w, h) in [(32, 32), (57, 40)] {
            let img = GrayImage::filled(w, h, v);
            let f = extract_features(&img, Region::full(&img), &p, true).map_err(|e| e.to_string())?;
            check(f.iter().all(|&x| x == 0.0), format!("value {v} {w}x{h}: {f:?}"))?;
        }
    }
    Ok("6 features exactly 0 on 10 constant images".into())
}

fn blur_monotonic() -> Outcome {
    for seed in 0..10 {
        let img = noise_image(96, 96, 500 + seed);
        let r = Region::full(&img);
        let mut prev: Option<(f64, f64)> = None;
        for sigma in [1.0, 2.0, 4.0] {
            let b = gaussian_blur(&img, sigma);
            let t = tenengrad_mean(&b, r).map_err(|e| e.to_string())?;
            let lv = laplacian_stats(&b, r).map_err(|e| e.to_string())?.variance;
            if let Some((pt, plv)) = prev {
                check(t < pt && lv < plv, format!("seed {seed} sigma {sigma}: ({t}, {lv}) after ({pt}, {plv})"))?;
            }
            prev = Some((t, lv));
        }
    }
    Ok("10 seeds, tenengrad and laplacian variance strictly decrease over sigma 1, 2, 4".into())
}

fn gbdt_correctness() -> Outcome {
    let toy = TrainParams { min_child_weight: 0.0, ..Default::default() };
    let (rows, labels) = common::line_fixture();
    let m = train(&rows, &labels, &toy, "line").map_err(|e| e.to_string())?;
    // g = 0.5 - y, h = 0.25. Cutting at 1.5 gives 1/2 * (1/1.5 + 1/1.5) = 2/3;
    // cutting at 0.5 or 2.5 gives 1/2 * (0.25/1.25 + 0.25/1.75) ~= 0.171.
    match m.trees[0].nodes[0] {
        Node::Split { feature: 0, threshold: 1.5, .. } => {}
        ref other => return Err(format!("round-1 root is {other:?}, expected split at 1.5")),
    }

    let (xr, xl) = common::xor_fixture();
    let xm = train(&xr, &xl, &toy, "xor").map_err(|e| e.to_string())?;
    let correct = xr.iter().zip(&xl).filter(|(r, &l)| xm.predict_label(r, 0.5).unwrap() == l).count();
    check(correct == 4, format!("xor training accuracy {correct}/4"))?;

    let fixtures = [common::line_fixture(), common::xor_fixture(), common::blob_fixture(80, 3)];
    for (i, (rows, labels)) in fixtures.iter().enumerate() {
        for p in [toy, TrainParams::default()] {
            let (_, hist) = train_with_history(rows, labels, &p, "f").map_err(|e| e.to_string())?;
            check(hist.len() == 101, "history length")?;
            if let Some(r) = hist.windows(2).position(|w| w[1] > w[0]) {
                return Err(format!("fixture {i}: logloss rose at round {}: {} -> {}", r + 1, hist[r], hist[r + 1]));
            }
        }
    }

    // Real extracted features. Once the default min_child_weight blocks every
    // split, rounds add root-only trees with weights ~1e-8 whose true effect
    // on the mean loss is below one ulp, so only the module invariant
    // (<= round 0, strictly decreasing early) is asserted here and any
    // rounding-level wobble is reported.
    let c = corpus(48, 48, 20, 5, 11);
    let cfg = FeatureConfig::new(Variant::GlobalLbp, 1, FeatureParams::default()).unwrap();
    let rows: Vec<Vec<f64>> = c.iter().map(|(img, _)| extract_vector_par(img, &cfg).unwrap().values).collect();
    let labels: Vec<u8> = c.iter().map(|(_, l)| *l).collect();
    let (_, hist) = train_with_history(&rows, &labels, &TrainParams::default(), "f").map_err(|e| e.to_string())?;
    check(hist[1..].iter().all(|&l| l <= hist[0]), "real-feature logloss above round 0")?;
    check(hist[..6].windows(2).all(|w| w[1] < w[0]), "real-feature logloss not strictly decreasing early")?;
    let wobble = hist.windows(2).map(|w| (w[1] - w[0]).max(0.0)).fold(0.0, f64::max);

    let model = train(&rows, &labels, &TrainParams::default(), cfg.id()).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("model.json");
    model.save(&path).map_err(|e| e.to_string())?;
    let back = GbdtModel::load(&path).map_err(|e| e.to_string())?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
    for _ in 0..100 {
        let x: Vec<f64> = (0..6).map(|_| rng.random_range(0.0..0.5)).collect();
        check(
            model.predict_proba(&x).unwrap().to_bits() == back.predict_proba(&x).unwrap().to_bits(),
            "save/load prediction differs",
        )?;
    }
    Ok(format!(
        "1-D split at 1.5, xor 4/4, logloss non-increasing on 3 fixtures x 2 settings \
         (real features: max late rise {wobble:.1e}, {:.1} ulp), round trip bit-identical",
        wobble / (hist[100].abs() * f64::EPSILON)
    ))
}

fn metric_oracles() -> Outcome {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
    for i in 0..100 {
        let n = rng.random_range(2..120);
        let mut labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        labels[0] = 0;
        labels[n - 1] = 1;
        let levels = rng.random_range(2..40u32);
        let scores: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..levels)) / f64::from(levels)).collect();
        let a = roc_auc(&scores, &labels).map_err(|e| e.to_string())?;
        let b = common::auc_pairs(&scores, &labels);
        check(a == b, format!("set {i}: {a} vs oracle {b}"))?;
    }
    let ex = roc_auc(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1]).map_err(|e| e.to_string())?;
    check(ex == 0.75, format!("worked example gave {ex}"))?;
    Ok("100 random sets equal the pair oracle; worked example = 0.75".into())
}

fn kbd_reproduction() -> (Status, String) {
    let Some(root) = std::env::var_os("PATCHBLUR_KBD_DIR") else {
        return (Status::Skip, "PATCHBLUR_KBD_DIR not set".into());
    };
    let run = || -> Outcome {
        let start = Instant::now();
        let manifest = scan_dataset(&root).map_err(|e| e.to_string())?;
        let cfg = FeatureConfig::new(Variant::LbpGrid, 7, FeatureParams::default()).unwrap();
        let rows = manifest
            .entries
            .par_iter()
            .map(|e| Ok(extract_vector_par(&load_gray(&e.path)?, &cfg)?.values))
            .collect::<patchblur::Result<Vec<_>>>()
            .map_err(|e| e.to_string())?;
        let labels = manifest.labels();
        let plan = make_folds(&labels, 5, 5, 0).map_err(|e| e.to_string())?;
        let report =
            cross_validate(&rows, &labels, &cfg.id(), &TrainParams::default(), &plan).map_err(|e| e.to_string())?;
        let acc = report.accuracy.mean * 100.0;
        let auc = report.auc.mean;
        let detail =
            format!("{} images, accuracy {acc:.2}%, AUC {auc:.4}, {:.0} s", rows.len(), start.elapsed().as_secs_f64());
        check((88.0..=92.0).contains(&acc) && (0.94..=0.97).contains(&auc), detail.clone())?;
        Ok(detail)
    };
    match run() {
        Ok(s) => (Status::Pass, s),
        Err(s) => (Status::Fail, s),
    }
}

fn linear_scaling() -> Outcome {
    let start = Instant::now();
    let c = corpus(96, 96, 10, 0, 4);
    let cfg = FeatureConfig::new(Variant::LbpGrid, 7, FeatureParams::default()).unwrap();
    let rows: Vec<Vec<f64>> = c.iter().map(|(img, _)| extract_vector_par(img, &cfg).unwrap().values).collect();
    let labels: Vec<u8> = c.iter().map(|(_, l)| *l).collect();
    let model = train(&rows, &labels, &TrainParams::default(), cfg.id()).map_err(|e| e.to_string())?;
    let images = [texture_image(640, 480, 1), noise_image(512, 512, 2)];
    let sizes = [(256, 256), (512, 512), (1024, 1024), (2048, 2048)];
    let report = bench_inference(&model, &images, &sizes, 3, false).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let r2 = report.linear_fit.r_squared;
    let per: Vec<String> = report.per_size.iter().map(|t| format!("{:.1}", t.mean_ms)).collect();
    let detail = format!("r^2 = {r2:.4}, mean ms per size [{}], {:.1} s", per.join(", "), elapsed.as_secs_f64());
    check(r2 >= 0.95, detail.clone())?;
    check(elapsed < Duration::from_secs(120), format!("{detail} (limit 120 s)"))?;
    Ok(detail)
}

fn ordering_on_synthetic() -> Outcome {
    let c = corpus(96, 96, 100, 30, 2024);
    let labels: Vec<u8> = c.iter().map(|(_, l)| *l).collect();
    let plan = make_folds(&labels, 5, 5, 0).map_err(|e| e.to_string())?;
    let mut acc = Vec::new();
    for (v, g) in [(Variant::LbpGrid, 7), (Variant::Grid, 7), (Variant::Global, 1)] {
        let cfg = FeatureConfig::new(v, g, FeatureParams::default()).unwrap();
        let rows = c
            .par_iter()
            .map(|(img, _)| extract_vector_par(img, &cfg).map(|f| f.values))
            .collect::<patchblur::Result<Vec<_>>>()
            .map_err(|e| e.to_string())?;
        let report =
            cross_validate(&rows, &labels, &cfg.id(), &TrainParams::default(), &plan).map_err(|e| e.to_string())?;
        acc.push((cfg.id(), report.accuracy.mean));
    }
    let detail = acc.iter().map(|(id, a)| format!("{id} {a:.4}")).collect::<Vec<_>>().join(" >= ");
    check(acc[0].1 >= acc[1].1 && acc[1].1 >= acc[2].1, detail.clone())?;
    Ok(format!("{} images; {detail}", c.len()))
}

fn main() -> ExitCode {
    let criteria: Vec<Criterion> = vec![
        ("1 feature-oracle equivalence", Box::new(|| wrap(feature_oracle()))),
        ("2 constant-image zeros", Box::new(|| wrap(constant_zeros()))),
        ("3 blur monotonicity", Box::new(|| wrap(blur_monotonic()))),
        ("4 boosted-tree correctness", Box::new(|| wrap(gbdt_correctness()))),
        ("5 metric oracles", Box::new(|| wrap(metric_oracles()))),
        ("6 dataset reproduction", Box::new(kbd_reproduction)),
        ("7 linear scaling", Box::new(|| wrap(linear_scaling()))),
        ("8 variant ordering (synthetic)", Box::new(|| wrap(ordering_on_synthetic()))),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let (status, detail) = f();
        let tag = match status {
            Status::Pass => "PASS",
            Status::Skip => "SKIP",
            Status::Fail => {
                failed += 1;
                "FAIL"
            }
        };
        println!("{tag} [{name}] {detail}");
    }
    if failed > 0 {
        println!("acceptance: {failed} criterion(s) failed");
        ExitCode::FAILURE
    } else {
        println!("acceptance: all criteria met");
        ExitCode::SUCCESS
    }
}

fn wrap(o: Outcome) -> (Status, String) {
    match o {
        Ok(s) => (Status::Pass, s),
        Err(s) => (Status::Fail, s),
    }
}
