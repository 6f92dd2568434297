//! Acceptance suite. Runs every criterion in sequence, prints one
//! PASS/FAIL line each, and exits non-zero if any fails.

#![allow(clippy::type_complexity)]

use std::collections::HashMap;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use streetsafe::geolabel::{build_spatial_index, label_points, TypeCounts, EARTH_RADIUS_M};
use streetsafe::ingest::{
    category, AccidentRecord, AccidentType, CategoryVector, GeoPoint, ImageRecord, SegmentationRaster, IGNORE,
    NUM_CATEGORIES,
};
use streetsafe::insight::{chord_flows, ChordMatrix};
use streetsafe::metrics::{balanced_accuracy, f1_score, frank_hall_compose, roc_auc, ConfusionCounts};
use streetsafe::geolabel::OrdinalClass;
use streetsafe::mirror::{dummy_mirrors, find_mirrors, ConstraintMode, MirrorEntry, MirrorTarget};
use streetsafe::pipeline::{run, Command, RunConfig};
use streetsafe::scene::scene_disorder;
use streetsafe::synth::{generate_corpus, mirror_fixture, SynthSpec};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

// ---------------------------------------------------------------- 1, 2

/// Reported (name, recall, precision, accuracy, FP, TP, TN, FN) per city and type.
const REPORTED_RATES: [(&str, f64, f64, f64, f64, f64, f64, f64); 6] = [
    ("Barcelona P", 0.86, 0.72, 0.75, 17.8, 45.4, 29.8, 7.0),
    ("Barcelona V", 0.77, 0.84, 0.82, 7.1, 37.9, 44.1, 10.9),
    ("Madrid P", 0.76, 0.75, 0.75, 12.4, 37.5, 38.0, 12.1),
    ("Madrid V", 0.73, 0.74, 0.75, 12.0, 35.2, 40.1, 12.7),
    ("San Francisco P", 0.63, 0.81, 0.76, 6.6, 29.0, 47.7, 16.7),
    ("San Francisco V", 0.61, 0.82, 0.74, 6.3, 30.1, 44.7, 18.9),
];

fn reported_rates() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut bad = Vec::new();
    for (name, rec, prec, acc, fp, tp, tn, fn_) in REPORTED_RATES {
        let c = ConfusionCounts::new(tp / 100.0, fp / 100.0, tn / 100.0, fn_ / 100.0);
        for (what, got, want) in [
            ("recall", c.recall().unwrap(), rec),
            ("precision", c.precision().unwrap(), prec),
            ("accuracy", c.accuracy().unwrap(), acc),
        ] {
            let d = (got - want).abs();
            worst = worst.max(d);
            if d > 0.01 {
                bad.push(format!("{name} {what} {got:.4} vs {want}"));
            }
        }
    }
    verdict(bad.is_empty(), format!("6 rows, max deviation {worst:.4}{}", if bad.is_empty() { String::new() } else { format!("; {}", bad.join("; ")) }))
}

fn reported_f1() -> Verdict {
    let f1 = f1_score(0.72, 0.87).unwrap();
    verdict((0.77..=0.79).contains(&f1), format!("f1(0.72, 0.87) = {f1:.6}"))
}

// ---------------------------------------------------------------- 3

fn disorder_oracle(w: usize, h: usize, px: &[u8]) -> (u64, u64) {
    let (mut t, mut n) = (0u64, 0u64);
    for i in 0..h {
        for j in 0..w {
            let a = px[i * w + j];
            let mut visit = |b: u8| {
                if a != IGNORE && b != IGNORE {
                    n += 1;
                    if a != b {
                        t += 1;
                    }
                }
            };
            if j + 1 < w {
                visit(px[i * w + j + 1]);
            }
            if i + 1 < h {
                visit(px[(i + 1) * w + j]);
            }
        }
    }
    (t, n)
}

fn scene_disorder_checks() -> Verdict {
    let uniform = SegmentationRaster::uniform(16, 16, category::ROAD).unwrap();
    let u = scene_disorder(&uniform).unwrap().value;
    let checker: Vec<u8> = (0..256).map(|i| if (i / 16 + i % 16) % 2 == 0 { category::ROAD } else { category::SKY }).collect();
    let c = scene_disorder(&SegmentationRaster::new(16, 16, checker).unwrap()).unwrap().value;
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let mut mismatches = 0;
    let mut compared = 0;
    for _ in 0..500 {
        let px: Vec<u8> = (0..256)
            .map(|_| if rng.random_bool(0.05) { IGNORE } else { rng.random_range(0..4u8) })
            .collect();
        let (t, n) = disorder_oracle(16, 16, &px);
        if n == 0 {
            continue;
        }
        compared += 1;
        let d = scene_disorder(&SegmentationRaster::new(16, 16, px).unwrap()).unwrap();
        if d.raw_transitions != t || d.counted_pairs != n || d.value != t as f64 / n as f64 {
            mismatches += 1;
        }
    }
    verdict(
        u == 0.0 && c == 1.0 && mismatches == 0 && compared == 500,
        format!("uniform {u}, checkerboard {c}, {compared} random rasters, {mismatches} mismatches"),
    )
}

// ---------------------------------------------------------------- 4

fn haversine_oracle(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (la1, lo1) = (a.0.to_radians(), a.1.to_radians());
    let (la2, lo2) = (b.0.to_radians(), b.1.to_radians());
    let h = ((la2 - la1) / 2.0).sin().powi(2) + la1.cos() * la2.cos() * ((lo2 - lo1) / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

fn brute_counts(img: &ImageRecord, accidents: &[AccidentRecord], r: f64) -> TypeCounts {
    let mut c = TypeCounts::default();
    let p = (img.location.lat(), img.location.lon());
    for a in accidents {
        if haversine_oracle(p, (a.location.lat(), a.location.lon())) <= r {
            match a.accident_type {
                AccidentType::Pedestrian => c.pedestrian += 1,
                AccidentType::Vehicle => c.vehicle += 1,
            }
        }
    }
    c
}

fn random_city(seed: u64, n_images: usize, n_accidents: usize, extent_deg: f64) -> (Vec<ImageRecord>, Vec<AccidentRecord>) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let pt = |rng: &mut ChaCha20Rng| {
        GeoPoint::new(41.38 + rng.random::<f64>() * extent_deg, 2.17 + rng.random::<f64>() * extent_deg * 1.33).unwrap()
    };
    let images: Vec<ImageRecord> = (0..n_images).map(|i| ImageRecord::new(format!("i{i:06}"), pt(&mut rng))).collect();
    let accidents = (0..n_accidents)
        .map(|i| {
            // a tenth of the accidents cluster near images, so balls near the boundary are common
            let location = if i % 10 == 0 {
                let c = images[rng.random_range(0..n_images)].location;
                GeoPoint::new(c.lat() + rng.random_range(-6e-4..6e-4), c.lon() + rng.random_range(-8e-4..8e-4)).unwrap()
            } else {
                pt(&mut rng)
            };
            AccidentRecord {
                accident_id: format!("a{i:07}"),
                location,
                accident_type: if rng.random_bool(0.3) { AccidentType::Pedestrian } else { AccidentType::Vehicle },
            }
        })
        .collect();
    (images, accidents)
}

fn geolabel_exactness() -> Verdict {
    let r = 50.0;
    let mut mismatches = 0usize;
    let mut nonzero = 0usize;
    for seed in 0..10 {
        let (images, accidents) = random_city(100 + seed, 1_000, 10_000, 0.08);
        let index = build_spatial_index(&accidents, r).unwrap();
        let labels = label_points(&images, &index, r).unwrap();
        for (img, l) in images.iter().zip(&labels) {
            let want = brute_counts(img, &accidents, r);
            nonzero += usize::from(want.pedestrian + want.vehicle > 0);
            mismatches += usize::from(l.counts != want);
        }
    }

    let (images, accidents) = random_city(7, 100_000, 100_000, 0.09);
    let start = Instant::now();
    let index = build_spatial_index(&accidents, r).unwrap();
    let labels = label_points(&images, &index, r).unwrap();
    let elapsed = start.elapsed();
    let mut big_mismatch = 0usize;
    for i in (0..images.len()).step_by(100) {
        big_mismatch += usize::from(labels[i].counts != brute_counts(&images[i], &accidents, r));
    }
    verdict(
        mismatches == 0 && big_mismatch == 0 && elapsed < Duration::from_secs(10),
        format!(
            "10 corpora 1e3x1e4: {mismatches} mismatches ({nonzero} non-empty balls); 1e5x1e5 in {:.2} s, 1% oracle sample {big_mismatch} mismatches",
            elapsed.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- 5, 6

fn euclid(a: &CategoryVector, b: &CategoryVector) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn exhaustive(t: &MirrorTarget, corpus: &[MirrorEntry], k: usize, both: bool) -> Vec<(String, f64)> {
    let mut all: Vec<(String, f64)> = corpus
        .iter()
        .filter(|e| e.image_id != t.image_id)
        .filter(|e| !both || (e.h_p < t.h_p && e.h_v < t.h_v))
        .map(|e| (e.image_id.clone(), euclid(&t.surrogate, &e.vector)))
        .collect();
    all.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

fn mirror_search() -> Verdict {
    let mut mismatches = 0usize;
    let mut infeasible = 0usize;
    let mut ratio_violations = 0usize;
    let mut returned = 0usize;
    for seed in 0..20 {
        let (targets, corpus) = mirror_fixture(500 + seed, 1_000);
        for t in &targets {
            for (mode, both) in [(ConstraintMode::Both, true), (ConstraintMode::Unconstrained, false)] {
                let got = find_mirrors(t, &corpus, 5, mode).unwrap();
                let got_pairs: Vec<(String, f64)> =
                    got.candidates.iter().map(|c| (c.image_id.clone(), c.distance)).collect();
                if got_pairs != exhaustive(t, &corpus, 5, both) {
                    mismatches += 1;
                }
                if both {
                    for c in &got.candidates {
                        returned += 1;
                        infeasible += usize::from(!(c.h_p < t.h_p && c.h_v < t.h_v));
                        ratio_violations += usize::from(!(c.h_p / t.h_p < 1.0 && c.h_v / t.h_v < 1.0));
                    }
                }
            }
        }
    }
    verdict(
        mismatches == 0 && infeasible == 0 && ratio_violations == 0,
        format!(
            "20 corpora x 1000 targets x 2 modes: {mismatches} oracle mismatches; {returned} Both-mode candidates, {infeasible} infeasible, {ratio_violations} ratios >= 1"
        ),
    )
}

fn dummy_baseline() -> Verdict {
    let (mut sum_p, mut sum_v, mut n) = (0.0, 0.0, 0usize);
    for seed in 0..40 {
        let (targets, corpus) = mirror_fixture(9_000 + seed, 1_000);
        for t in &targets {
            for c in dummy_mirrors(t, &corpus, 5).unwrap().candidates {
                sum_p += (c.h_p / t.h_p).ln();
                sum_v += (c.h_v / t.h_v).ln();
                n += 1;
            }
        }
    }
    let (mp, mv) = (sum_p / n as f64, sum_v / n as f64);
    verdict(
        mp.abs() <= 0.05 && mv.abs() <= 0.05,
        format!("40 corpora, {n} ratios: mean ln ratio_p {mp:+.4}, ratio_v {mv:+.4}"),
    )
}

// ---------------------------------------------------------------- 7, 8, 9

fn frank_hall() -> Verdict {
    let p = frank_hall_compose(&[0.9, 0.6, 0.2]).unwrap().class_probs;
    let want = [0.1, 0.3, 0.4, 0.2];
    let err = p.iter().zip(want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let mut rng = ChaCha20Rng::seed_from_u64(77);
    let mut invalid = 0;
    for _ in 0..1_000 {
        let x: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
        let q = frank_hall_compose(&x).unwrap().class_probs;
        let ok = q.len() == 4 && q.iter().all(|v| *v >= 0.0 && *v <= 1.0) && (q.iter().sum::<f64>() - 1.0).abs() < 1e-12;
        invalid += usize::from(!ok);
    }

    let truths: Vec<OrdinalClass> = OrdinalClass::ALL.iter().flat_map(|c| std::iter::repeat_n(*c, 250)).collect();
    let dummy = vec![OrdinalClass::NoDanger; truths.len()];
    let bacc = balanced_accuracy(&truths, &dummy).unwrap();
    verdict(
        err <= 1e-15 && invalid == 0 && bacc == 0.25,
        format!("(0.9,0.6,0.2) -> {p:?} (max error {err:.1e}); {invalid}/1000 invalid; dummy balanced accuracy {bacc}"),
    )
}

fn mann_whitney(pairs: &[(bool, f64)]) -> f64 {
    let (mut wins, mut n) = (0.0, 0.0);
    for a in pairs.iter().filter(|p| p.0) {
        for b in pairs.iter().filter(|p| !p.0) {
            n += 1.0;
            wins += if a.1 > b.1 { 1.0 } else if a.1 == b.1 { 0.5 } else { 0.0 };
        }
    }
    wins / n
}

fn roc_vs_mann_whitney() -> Verdict {
    let mut rng = ChaCha20Rng::seed_from_u64(88);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < 100 {
        let n = rng.random_range(2..=200);
        let levels = rng.random_range(2..50);
        let pairs: Vec<(bool, f64)> = (0..n)
            .map(|_| {
                let y = rng.random_bool(0.4);
                let s = (rng.random_range(0..levels) as f64 + if y { 3.0 } else { 0.0 }) / (levels + 3) as f64;
                (y, s)
            })
            .collect();
        if pairs.iter().all(|p| p.0) || pairs.iter().all(|p| !p.0) {
            continue;
        }
        worst = worst.max((roc_auc(&pairs).unwrap() - mann_whitney(&pairs)).abs());
        done += 1;
    }
    verdict(worst <= 1e-9, format!("100 instances with ties, max |AUC - U| = {worst:.2e}"))
}

fn random_simplex(rng: &mut ChaCha20Rng) -> CategoryVector {
    let mut v = [0.0; NUM_CATEGORIES];
    for x in v.iter_mut() {
        *x = if rng.random_bool(0.3) { 0.0 } else { rng.random::<f64>() };
    }
    v[rng.random_range(0..NUM_CATEGORIES)] += 0.1;
    let s: f64 = v.iter().sum();
    v.map(|x| x / s)
}

fn chord_balance() -> Verdict {
    let mut rng = ChaCha20Rng::seed_from_u64(99);
    let mut worst: f64 = 0.0;
    for _ in 0..1_000 {
        let (a, b) = (random_simplex(&mut rng), random_simplex(&mut rng));
        let mut m = ChordMatrix::default();
        let moved = m.add_pair(&a, &b);
        let gain: f64 = a.iter().zip(&b).map(|(x, y)| (y - x).max(0.0)).sum();
        let loss: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).max(0.0)).sum();
        worst = worst.max((m.total() - gain).abs()).max((moved - gain).abs()).max((loss - gain).abs());
    }
    let v = |pairs: &[(u8, f64)]| {
        let mut x = [0.0; NUM_CATEGORIES];
        for &(c, f) in pairs {
            x[c as usize] = f;
        }
        x
    };
    use category::{BUILDING, ROAD, SKY};
    let (a, b) = (v(&[(ROAD, 0.6), (SKY, 0.4)]), v(&[(ROAD, 0.4), (SKY, 0.6)]));
    let m1 = chord_flows([(&a, &b)]);
    let (c, d) = (v(&[(ROAD, 0.5), (BUILDING, 0.3), (SKY, 0.2)]), v(&[(ROAD, 0.3), (BUILDING, 0.2), (SKY, 0.5)]));
    let m2 = chord_flows([(&c, &d)]);
    let f = |m: &ChordMatrix, s: u8, t: u8| m.flow[s as usize][t as usize];
    let examples_ok = (f(&m1, ROAD, SKY) - 0.2).abs() <= 1e-15
        && (m1.total() - 0.2).abs() <= 1e-15
        && (f(&m2, ROAD, SKY) - 0.2).abs() <= 1e-15
        && (f(&m2, BUILDING, SKY) - 0.1).abs() <= 1e-15
        && (m2.total() - 0.3).abs() <= 1e-15;
    verdict(
        worst <= 1e-12 && examples_ok,
        format!(
            "1000 pairs, max imbalance {worst:.1e}; worked examples road->sky {} / {}, building->sky {}",
            f(&m1, ROAD, SKY),
            f(&m2, ROAD, SKY),
            f(&m2, BUILDING, SKY)
        ),
    )
}

// ---------------------------------------------------------------- 10

fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap());
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn planted_correlation() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let spec = SynthSpec { seed: 2024, n_images: 2_000, coupling: 1.0, ..SynthSpec::default() };
    generate_corpus(&spec, &corpus).unwrap();
    let cfg = RunConfig { corpus: Some(corpus), out: dir.path().join("out"), ..RunConfig::default() };
    run(Command::Hexbin, &cfg).unwrap();
    let text = std::fs::read_to_string(dir.path().join("out/hexbin.csv")).unwrap();
    let n = cfg.grid_n as f64;
    let (mut centre, mut mean_sd) = (Vec::new(), Vec::new());
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let (cv, cp): (f64, f64) = (f[0].parse().unwrap(), f[1].parse().unwrap());
        centre.push(((cv + 0.5) / n + (cp + 0.5) / n) / 2.0);
        mean_sd.push(f[3].parse::<f64>().unwrap());
    }
    let rho = spearman(&mean_sd, &centre);
    verdict(rho > 0.9, format!("n=2000, {} populated cells, Spearman {rho:.4}", centre.len()))
}

// ---------------------------------------------------------------- 11

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn pipeline(corpus: &Path, out: &Path, threads: usize) {
    let base = RunConfig { corpus: Some(corpus.into()), out: out.into(), threads: Some(threads), ..RunConfig::default() };
    let ordinal_input = out.with_extension("ordinal.csv");
    let scores: HashMap<String, f64> = std::fs::read_to_string(corpus.join("images.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[11].parse().unwrap())
        })
        .collect();
    let mut ids: Vec<&String> = scores.keys().collect();
    ids.sort();
    let mut text = String::from("image_id,p_gt_1,p_gt_2,p_gt_3\n");
    for id in ids {
        let h = scores[id];
        text.push_str(&format!("{id},{},{},{}\n", h, h * h, h.powi(4)));
    }
    std::fs::write(&ordinal_input, text).unwrap();
    let cfg = RunConfig { ordinal_input: Some(ordinal_input), ..base };
    for command in [
        Command::Validate(streetsafe::ingest::Requirements::all()),
        Command::Label,
        Command::Score,
        Command::Scene,
        Command::Radar,
        Command::Hexbin,
        Command::Mirror,
        Command::Chord,
        Command::Landscape,
        Command::Metrics,
        Command::Ordinal,
    ] {
        let o = run(command, &cfg).unwrap();
        assert!(!o.failed, "{command:?}: {}", o.summary);
    }
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let spec = SynthSpec { seed: 11, n_images: 500, ..SynthSpec::default() };
    let (c1, c2) = (dir.path().join("c1"), dir.path().join("c2"));
    generate_corpus(&spec, &c1).unwrap();
    generate_corpus(&spec, &c2).unwrap();
    let corpus_same = dir_bytes(&c1) == dir_bytes(&c2);

    let runs = [(&c1, "o1", 1), (&c1, "o8", 8), (&c2, "o8b", 8)];
    let outputs: Vec<_> = runs
        .iter()
        .map(|(c, name, threads)| {
            let out = dir.path().join(name);
            pipeline(c, &out, *threads);
            dir_bytes(&out)
        })
        .collect();
    let files = outputs[0].len();
    let same_threads = outputs[0] == outputs[1];
    let same_runs = outputs[1] == outputs[2];
    verdict(
        corpus_same && same_threads && same_runs && files >= 11,
        format!(
            "corpus identical: {corpus_same}; {files} output files; threads 1 vs 8 identical: {same_threads}; repeat run identical: {same_runs}"
        ),
    )
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Verdict); 11] = [
        ("reported rate arithmetic", Duration::from_secs(1), reported_rates),
        ("reported F1", Duration::from_secs(1), reported_f1),
        ("scene disorder", Duration::from_secs(5), scene_disorder_checks),
        ("geolabel exactness", Duration::from_secs(60), geolabel_exactness),
        ("mirror search", Duration::from_secs(10), mirror_search),
        ("dummy baseline", Duration::from_secs(30), dummy_baseline),
        ("Frank-Hall", Duration::from_secs(5), frank_hall),
        ("ROC AUC vs Mann-Whitney", Duration::from_secs(5), roc_vs_mann_whitney),
        ("chord mass balance", Duration::from_secs(5), chord_balance),
        ("planted correlation", Duration::from_secs(30), planted_correlation),
        ("end-to-end determinism", Duration::from_secs(300), determinism),
    ];
    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= *budget;
        let pass = v.pass && in_time;
        failed += usize::from(!pass);
        println!(
            "criterion {:>2} {} {name}: {} [{:.2} s, budget {} s]",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            v.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
