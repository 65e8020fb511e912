//! Acceptance suite. One `PASS`/`FAIL` line per criterion.
//!
//! `GDRKIT_ACCEPT_QUICK=1` skips the two benchmark criteria (8, 9).
//! Benchmark criteria are printed like the rest but only gate the exit status
//! under `GDRKIT_ACCEPT_STRICT=1`; every other criterion always gates it.

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use gdrkit::manifest::Manifest;
use gdrkit::runner::run_protocols;
use gdrkit::synth::{write_corpus, MANIFEST_NAME};
use gdrkit_core::augment::{apply_plan, fundus_aug, AugConfig, TransformKind};
use gdrkit_core::bench::metrics::binary_auc;
use gdrkit_core::bench::{auc_ovr_macro, default_specs, desk_preset, generate, make_splits, MetricsReport, Protocol};
use gdrkit_core::data::N_GRADES;
use gdrkit_core::dcr::{dcr_weights, DomainClassCounts, OccurrenceProbs};
use gdrkit_core::gradcheck::{check_cross_entropy, check_network, check_ntxent, small_net_config, FD_EPSILON};
use gdrkit_core::image::inscribed_circle_mask;
use gdrkit_core::losses::{cross_entropy, ntxent, EmbeddingBatch, LogitsBatch};
use gdrkit_core::model::{train, AlphaMode, Method, TrainConfig};
use gdrkit_core::rng::{Purpose, RngStream};
use gdrkit_core::ImageRgb;

const SEEDS: [u64; 3] = [0, 1, 2];

struct Outcome {
    id: &'static str,
    pass: bool,
    gates: bool,
    detail: String,
}

fn outcome(id: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome {
        id,
        pass,
        gates: true,
        detail,
    }
}

fn flag(name: &str) -> bool {
    std::env::var(name).is_ok_and(|v| v == "1")
}

fn c1_gradients() -> Outcome {
    let n = 20;
    let t = Instant::now();
    let ce = check_cross_entropy(n, 11).unwrap();
    let nt = check_ntxent(n, 12).unwrap();
    let net = check_network(n, 13, small_net_config()).unwrap();
    let el = t.elapsed();
    let pass = ce.max_rel_error < 1e-5
        && nt.max_rel_error < 1e-5
        && net.max_rel_error < 1e-4
        && ce.instances >= 20
        && nt.instances >= 20
        && net.instances >= 20
        && FD_EPSILON == 1e-5
        && el < Duration::from_secs(120);
    outcome(
        "1 gradient checks",
        pass,
        format!(
            "eps {FD_EPSILON:e}; CE {:.2e} ({} inst), NT-Xent {:.2e} ({} inst), network {:.2e} ({} inst); {:.1?}",
            ce.max_rel_error, ce.instances, nt.max_rel_error, nt.instances, net.max_rel_error, net.instances, el
        ),
    )
}

fn c2_ntxent() -> Outcome {
    let one = ntxent(&EmbeddingBatch::normalized(3, vec![0.3, -0.2, 0.9], vec![0.1, 0.5, 0.2]).unwrap(), 0.1).unwrap();
    let row = vec![0.6, 0.0, 0.8];
    let rows: Vec<f64> = row.iter().chain(&row).copied().collect();
    let two = ntxent(&EmbeddingBatch::new(3, rows.clone(), rows).unwrap(), 0.1).unwrap();
    let err = (two.loss - 3f64.ln()).abs();
    outcome(
        "2 NT-Xent closed forms",
        one.loss == 0.0 && err <= 1e-12,
        format!("N=1 loss {:e}; N=2 identical |loss - ln 3| = {err:.1e}", one.loss),
    )
}

fn c3_uniform_ce() -> Outcome {
    let c = 5;
    let batch = LogitsBatch::unweighted(c, vec![0.7; 4 * c], vec![0, 1, 2, 4]).unwrap();
    let err = (cross_entropy(&batch).unwrap().loss - 5f64.ln()).abs();
    outcome("3 uniform CE = ln 5", err <= 1e-12, format!("error {err:.1e}"))
}

fn direct_weights(counts: &[u64], beta: f64) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    let q: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
    q.iter()
        .map(|&qc| {
            if qc == 0.0 {
                return 0.0;
            }
            let mut s = 0.0;
            for &qj in &q {
                if qj > 0.0 {
                    s += qj.powf(beta);
                }
            }
            s / qc.powf(beta)
        })
        .collect()
}

fn c4_dcr() -> Outcome {
    let mut rng = RngStream::new(404);
    let mut max_err = 0.0f64;
    let mut monotone = true;
    for _ in 0..100 {
        let nd = 1 + rng.below(5);
        let counts: Vec<u64> = (0..nd * N_GRADES).map(|_| rng.below(60) as u64).collect();
        if counts.iter().all(|&c| c == 0) {
            continue;
        }
        let beta = rng.uniform();
        let domains: Vec<String> = (0..nd).map(|d| format!("d{d}")).collect();
        let table = dcr_table(&domains, &counts, beta);
        for (a, b) in table.w.iter().zip(direct_weights(&counts, beta)) {
            max_err = max_err.max((a - b).abs() / b.abs().max(1.0));
        }
        let mut last = 0.0;
        for k in 0..=10 {
            let disp = dcr_table(&domains, &counts, k as f64 / 10.0).dispersion();
            monotone &= disp >= last - 1e-12;
            last = disp;
        }
    }
    let d = vec!["d".to_string()];
    let flat = dcr_table(&d, &[5, 9, 1, 0, 30], 0.0);
    let present: Vec<f64> = flat.w.iter().copied().filter(|&w| w > 0.0).collect();
    let equal = present.iter().all(|&w| w == present[0]);
    let probs = OccurrenceProbs {
        domains: vec!["d".into()],
        n_classes: 2,
        q: vec![0.75, 0.25],
    };
    let w = dcr_weights(&probs, 1.0).unwrap().w;
    let hand = (w[0] - 4.0 / 3.0).abs() <= 1e-12 && (w[1] - 4.0).abs() <= 1e-12;
    outcome(
        "4 DCR weights",
        max_err <= 1e-12 && equal && hand && monotone,
        format!(
            "100 tables max err {max_err:.1e}; beta 0 equal {equal}; (0.75, 0.25) -> ({:.6}, {:.6}); dispersion monotone {monotone}",
            w[0], w[1]
        ),
    )
}

fn dcr_table(domains: &[String], counts: &[u64], beta: f64) -> gdrkit_core::dcr::DcrTable {
    let c = DomainClassCounts::new(domains.to_vec(), N_GRADES, counts.to_vec()).unwrap();
    gdrkit_core::dcr::DcrTable::from_counts(&c, beta).unwrap()
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "png" || x == "jsonl"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

fn test_image(seed: u64) -> ImageRgb {
    let mut rng = RngStream::new(seed);
    let img = ImageRgb::from_fn(48, 40, |_, _| [rng.uniform(), rng.uniform(), rng.uniform()]).unwrap();
    img.with_mask(inscribed_circle_mask(48, 40)).unwrap()
}

fn c5_augmentation() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let input = root.join("in");
    std::fs::create_dir_all(&input).unwrap();
    for k in 0..6 {
        gdrkit::io::save_image(&test_image(k), &input.join(format!("img{k}.png"))).unwrap();
    }
    let run = |name: &str| {
        let out = root.join(name);
        let plans = root.join(format!("{name}.jsonl"));
        let code = gdrkit::cli::dispatch([
            "gdrkit",
            "--quiet",
            "augment",
            "--in",
            input.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "77",
            "--plan-out",
            plans.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        let mut files = read_dir_bytes(&out);
        files.push(("plans".into(), std::fs::read(plans).unwrap()));
        files
    };
    let reproducible = run("a") == run("b");

    let mut identity_err = 0.0f64;
    let mut in_range = true;
    let mut replay_exact = true;
    let ident = AugConfig::default().with_identity_ranges().with_probability(1.0);
    let full = AugConfig::default().with_probability(1.0);
    let half = AugConfig::default();
    for k in 0..40u64 {
        let img = test_image(100 + k);
        let mut rng = RngStream::derive(5, k, 0, Purpose::FundusAug);
        let (out, _) = fundus_aug(&img, &ident, &mut rng);
        for (a, b) in out.data().iter().zip(img.data()) {
            identity_err = identity_err.max((a - b).abs());
        }
        for cfg in [&full, &half] {
            let (out, plan) = fundus_aug(&img, cfg, &mut rng);
            in_range &= out.data().iter().all(|v| (0.0..=1.0).contains(v));
            replay_exact &= apply_plan(&img, &plan).data() == out.data();
        }
    }
    let single = TransformKind::ALL.iter().all(|&kind| {
        let mut cfg = AugConfig::default().with_probability(0.0);
        cfg.setting_mut(kind).probability = 1.0;
        (0..5u64).all(|k| {
            let img = test_image(200 + k);
            let (out, plan) = fundus_aug(&img, &cfg, &mut RngStream::new(k));
            out.data().iter().all(|v| (0.0..=1.0).contains(v)) && apply_plan(&img, &plan).data() == out.data()
        })
    });
    outcome(
        "5 augmentation",
        reproducible && identity_err <= 1e-4 && in_range && replay_exact && single,
        format!(
            "byte-identical corpus {reproducible}; identity max err {identity_err:.1e}; in [0,1] {}; replay exact {}",
            in_range && single,
            replay_exact && single
        ),
    )
}

fn brute_auc(scores: &[f64], labels: &[usize], classes: usize) -> f64 {
    let mut sum = 0.0;
    let mut present = 0;
    for c in 0..classes {
        let pos: Vec<f64> = (0..labels.len()).filter(|&i| labels[i] == c).map(|i| scores[i * classes + c]).collect();
        let neg: Vec<f64> = (0..labels.len()).filter(|&i| labels[i] != c).map(|i| scores[i * classes + c]).collect();
        if pos.is_empty() || neg.is_empty() {
            continue;
        }
        let mut wins = 0.0;
        for p in &pos {
            for n in &neg {
                wins += if p > n {
                    1.0
                } else if p == n {
                    0.5
                } else {
                    0.0
                };
            }
        }
        sum += wins / (pos.len() * neg.len()) as f64;
        present += 1;
    }
    sum / present as f64
}

fn softmax_rows(raw: &[f64], classes: usize) -> Vec<f64> {
    raw.chunks(classes).flat_map(gdrkit_core::losses::softmax).collect()
}

fn c6_auc() -> Outcome {
    let mut rng = RngStream::new(606);
    let mut max_err = 0.0f64;
    for inst in 0..50 {
        let classes = 2 + rng.below(4);
        let n = classes * 2 + rng.below(40);
        let mut labels: Vec<usize> = (0..n).map(|i| if i < classes { i } else { rng.below(classes) }).collect();
        rng.shuffle(&mut labels);
        // coarse scores force ties on some instances
        let raw: Vec<f64> = (0..n * classes)
            .map(|_| if inst % 2 == 0 { (rng.uniform() * 4.0).floor() } else { rng.normal() })
            .collect();
        let scores = softmax_rows(&raw, classes);
        let got = auc_ovr_macro(&scores, &labels, classes).unwrap();
        max_err = max_err.max((got - brute_auc(&scores, &labels, classes)).abs());
    }
    let labels = [0usize, 1, 2, 1, 0, 2];
    let perfect: Vec<f64> = labels.iter().flat_map(|&l| (0..3).map(move |c| if c == l { 0.9 } else { 0.05 })).collect();
    let p = auc_ovr_macro(&perfect, &labels, 3).unwrap();
    let b = binary_auc(&[0.9, 0.1], &[true, false]).unwrap();
    outcome(
        "6 rank AUC",
        max_err <= 1e-9 && 100.0 * p == 100.0 && b == 1.0,
        format!("50 instances max |AUC - brute| {max_err:.1e}; perfect {}%", 100.0 * p),
    )
}

fn c7_splits() -> Outcome {
    let six: Vec<String> = (0..6).map(|i| format!("dom{i}")).collect();
    let dg = make_splits(&six, Protocol::Dg).unwrap();
    let disjoint = dg.runs.iter().all(|r| r.train_domains.iter().all(|d| !r.test_domains.contains(d)));
    let covered = dg
        .runs
        .iter()
        .all(|r| r.train_domains.len() + r.test_domains.len() == 6 && r.test_domains.len() == 1);
    let every_target: Vec<&String> = dg.runs.iter().flat_map(|r| &r.test_domains).collect();
    let each_once = six.iter().all(|d| every_target.iter().filter(|t| **t == d).count() == 1);
    let three: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
    let esdg = make_splits(&three, Protocol::Esdg).unwrap();
    let expected = [("a", ["b", "c"]), ("b", ["a", "c"]), ("c", ["a", "b"])];
    let exact = esdg.runs.len() == 3
        && esdg.runs.iter().zip(expected).all(|(r, (tr, te))| {
            r.train_domains == [tr.to_string()] && r.test_domains == te.map(String::from).to_vec()
        });
    outcome(
        "7 protocol splits",
        dg.runs.len() == 6 && disjoint && covered && each_once && exact,
        format!("DG runs {}; disjoint {disjoint}; coverage {}; ESDG exact {exact}", dg.runs.len(), covered && each_once),
    )
}

fn c10_reduction() -> Outcome {
    let corpus = generate(&default_specs(), 10).unwrap();
    let ds = corpus.dataset.subset(&corpus.dataset.domains[..2]).unwrap();
    let mut erm = desk_preset(Method::Erm, 3);
    erm.epochs = 2;
    erm.net.input_width = 32;
    erm.net.input_height = 32;
    erm.aug = erm.aug.with_probability(0.0);
    let mut gdr = erm.clone();
    gdr.method = Method::GdrNet;
    gdr.alpha = AlphaMode::Constant(0.0);
    gdr.unit_weights = true;
    let small = |d: &gdrkit_core::data::View<'_>| -> gdrkit_core::data::Dataset {
        let samples = d
            .samples
            .iter()
            .map(|s| gdrkit_core::data::Sample {
                image: gdrkit_core::image::resize_bilinear(&s.image, 32, 32).unwrap(),
                grade: s.grade,
                domain: s.domain,
            })
            .collect();
        gdrkit_core::data::Dataset::new(corpus.dataset.domains.clone(), d.n_classes, samples).unwrap()
    };
    let small_ds = small(&ds);
    let view = small_ds.view();
    let a = train(&erm, &view).unwrap();
    let b = train(&gdr, &view).unwrap();
    let identical = a.net.params().iter().zip(b.net.params()).all(|(x, y)| x.to_bits() == y.to_bits());
    outcome(
        "10 GDRNet reduces to ERM",
        identical && a.net.params().len() == b.net.params().len(),
        format!("{} parameters bit-identical {identical}", a.net.params().len()),
    )
}

struct Bench {
    erm: f64,
    gdrnet: f64,
    components: Vec<(Method, f64)>,
    headline_time: Duration,
}

fn mean_auc(reports: &[MetricsReport]) -> f64 {
    reports.iter().map(|r| r.average.auc).sum::<f64>() / reports.len() as f64
}

/// Default 4-domain corpus written to disk and reloaded through the manifest,
/// so the benchmark covers the file path as well.
fn run_bench() -> Bench {
    let tmp = tempfile::tempdir().unwrap();
    let methods = [Method::Erm, Method::GdrNet, Method::A, Method::B, Method::C, Method::D];
    let mut per_method: Vec<Vec<MetricsReport>> = vec![Vec::new(); methods.len()];
    let mut headline_time = Duration::ZERO;
    for seed in SEEDS {
        let dir = tmp.path().join(format!("corpus{seed}"));
        write_corpus(&default_specs(), seed, &dir).unwrap();
        let ds = Manifest::load(&dir.join(MANIFEST_NAME)).unwrap().load_dataset(None).unwrap();
        let t = Instant::now();
        let cfgs: Vec<TrainConfig> = methods[..2].iter().map(|&m| desk_preset(m, seed)).collect();
        let head = run_protocols(&ds, Protocol::Dg, &cfgs).unwrap();
        headline_time += t.elapsed();
        let cfgs: Vec<TrainConfig> = methods[2..].iter().map(|&m| desk_preset(m, seed)).collect();
        let rest = run_protocols(&ds, Protocol::Dg, &cfgs).unwrap();
        for (i, r) in head.into_iter().chain(rest).enumerate() {
            println!(
                "  seed {seed} {:>6}: mean AUC {:.2}  per target [{}]",
                r.method,
                r.average.auc,
                r.runs.iter().map(|x| format!("{:.1}", x.metrics.auc)).collect::<Vec<_>>().join(" ")
            );
            per_method[i].push(r);
        }
    }
    Bench {
        erm: mean_auc(&per_method[0]),
        gdrnet: mean_auc(&per_method[1]),
        components: methods[2..].iter().zip(&per_method[2..]).map(|(&m, r)| (m, mean_auc(r))).collect(),
        headline_time,
    }
}

fn c8_c9(b: &Bench) -> [Outcome; 2] {
    let margin = b.gdrnet - b.erm;
    let c8 = Outcome {
        id: "8 GDRNet beats ERM by >= 2 AUC",
        pass: margin >= 2.0 && b.headline_time < Duration::from_secs(30 * 60),
        gates: false,
        detail: format!(
            "GDRNet {:.2} vs ERM {:.2} (margin {margin:+.2}) over {} seeds; ERM+GDRNet runtime {:.0?}",
            b.gdrnet,
            b.erm,
            SEEDS.len(),
            b.headline_time
        ),
    };
    let best = b.components.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    let each_ok = b.components.iter().all(|&(_, auc)| auc >= b.erm - 0.5);
    let c9 = Outcome {
        id: "9 components and combination",
        pass: each_ok && b.gdrnet >= best - 0.5,
        gates: false,
        detail: format!(
            "{}; ERM {:.2}; GDRNet {:.2} vs best single {best:.2}",
            b.components.iter().map(|(m, a)| format!("{} {a:.2}", m.name())).collect::<Vec<_>>().join(", "),
            b.erm,
            b.gdrnet
        ),
    };
    [c8, c9]
}

fn main() -> ExitCode {
    let strict = flag("GDRKIT_ACCEPT_STRICT");
    let quick = flag("GDRKIT_ACCEPT_QUICK");
    let mut results = vec![
        c1_gradients(),
        c2_ntxent(),
        c3_uniform_ce(),
        c4_dcr(),
        c5_augmentation(),
        c6_auc(),
        c7_splits(),
    ];
    let mut skipped = false;
    if quick {
        skipped = true;
    } else {
        let b = run_bench();
        results.extend(c8_c9(&b));
    }
    results.push(c10_reduction());
    results.sort_by_key(|o| o.id.split(' ').next().unwrap().parse::<u32>().unwrap());

    let mut gating_failures = 0;
    for o in &results {
        let status = if o.pass { "PASS" } else { "FAIL" };
        let note = if !o.pass && !o.gates && !strict { "  [reported, not gating]" } else { "" };
        println!("{status}  {}: {}{note}", o.id, o.detail);
        if !o.pass && (o.gates || strict) {
            gating_failures += 1;
        }
    }
    if skipped {
        println!("SKIP  8 and 9: GDRKIT_ACCEPT_QUICK=1");
    }
    let passed = results.iter().filter(|o| o.pass).count();
    println!("acceptance: {passed}/{} passed, {gating_failures} gating failure(s)", results.len());
    if gating_failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
