//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.
//!
//! Runs the `discriminer` binary end to end for the micro-benchmark
//! reproductions and determinism, and the library directly for the
//! property checks and the scalability timing.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use discriminer_core::benchgen::{generate, BenchSpec, Family};
use discriminer_core::discriminant::clamped_ln;
use discriminer_core::dtree::TreeParams;
use discriminer_core::evaluation::{train, EvalReport, Learner, Model};
use discriminer_core::labeling::{label_corpus, weighted_labels};
use discriminer_core::mlc::{
    build_instance, solve_preprocessed, solve_two_label, IlpInstance, SolverOptions,
};
use discriminer_core::numeric::exact_sum;
use discriminer_core::trace::load_corpus;
use discriminer_core::{
    Corpus, Dataset, KChoice, LabelDistribution, LabelFile, PredicateMode, TimingSummary,
    TraceRecord,
};

const MICRO_K_MAX: usize = 12;
const LSB0_MIN_ACCURACY: f64 = 0.98;
const LSB0_MAX_CONJUNCTS: usize = 10;
const LSB0_MAX_RUNTIME_S: f64 = 10.0;
const PAT101_DT_MIN_ACCURACY: f64 = 0.95;
const PAT101_MLC_TARGET: f64 = 0.894;
const PAT101_MLC_BAND: f64 = 0.10;
const PAT101_DT_MAX_LEARN_S: f64 = 1.0;
const PAT101_SEEDS: std::ops::RangeInclusive<u64> = 1..=10;
const SCALE_DT_MAX_S: f64 = 60.0;
const SCALE_MIN_RATIO: f64 = 10.0;
const SCALE_MLC_LIMIT: Duration = Duration::from_secs(600);
const SCALE_TIMING_RUNS: usize = 3;
const ORACLE_INSTANCES: usize = 500;
const ORACLE_MAX_S: f64 = 60.0;
const LABEL_TRIPLES: usize = 10_000;
const LABEL_TOL: f64 = 1e-9;
const PREPROCESS_INSTANCES: usize = 1_000;

struct Report {
    failed: usize,
}

impl Report {
    fn check(&mut self, id: &str, name: &str, pass: bool, detail: String) {
        println!(
            "{} [{id}] {name}: {detail}",
            if pass { "PASS" } else { "FAIL" }
        );
        if !pass {
            self.failed += 1;
        }
    }
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_discriminer")
}

fn run(dir: &Path, args: &[&str]) {
    let out = Command::new(bin())
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn discriminer");
    assert!(
        out.status.success(),
        "discriminer {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read_eval(path: &Path) -> EvalReport {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

struct MicroRun {
    dir: PathBuf,
    dtree: EvalReport,
    mlc: EvalReport,
    elapsed_s: f64,
}

/// benchgen → cluster (auto k) → 20-fold eval of both learners.
fn micro(dir: &Path, name: &str, benchgen: &[&str], seed: &str) -> MicroRun {
    let dir = dir.join(name);
    std::fs::create_dir_all(&dir).unwrap();
    let k_max = MICRO_K_MAX.to_string();
    let start = Instant::now();
    let mut args = vec!["benchgen"];
    args.extend_from_slice(benchgen);
    args.extend_from_slice(&[
        "--repeats",
        "10",
        "--noise-ms",
        "1",
        "--seed",
        seed,
        "--out",
        "corpus.jsonl",
    ]);
    run(&dir, &args);
    run(
        &dir,
        &[
            "cluster",
            "--input",
            "corpus.jsonl",
            "--k",
            "auto",
            "--k-max",
            &k_max,
            "--seed",
            seed,
            "--out",
            "clusters.json",
        ],
    );
    for learner in ["dtree", "mlc"] {
        let out = format!("eval-{learner}.json");
        run(
            &dir,
            &[
                "eval",
                "--input",
                "corpus.jsonl",
                "--labels",
                "clusters.json",
                "--learner",
                learner,
                "--k",
                "20",
                "--seed",
                seed,
                "--out",
                &out,
            ],
        );
    }
    MicroRun {
        dtree: read_eval(&dir.join("eval-dtree.json")),
        mlc: read_eval(&dir.join("eval-mlc.json")),
        elapsed_s: start.elapsed().as_secs_f64(),
        dir,
    }
}

fn load_dataset(dir: &Path) -> Dataset {
    let corpus = load_corpus(&dir.join("corpus.jsonl")).unwrap();
    let labels: LabelFile =
        serde_json::from_str(&std::fs::read_to_string(dir.join("clusters.json")).unwrap()).unwrap();
    Dataset::new(&corpus, &labels, &PredicateMode::CalledOnce).unwrap()
}

fn lsb_msb_check(r: &mut Report, id: &str, name: &str, run: &MicroRun) {
    let dt = run.dtree.accuracy;
    let mlc = run.mlc.accuracy;
    let m = run.mlc.max_conjuncts.unwrap_or(usize::MAX);
    let pass = dt >= LSB0_MIN_ACCURACY
        && mlc >= LSB0_MIN_ACCURACY
        && m <= LSB0_MAX_CONJUNCTS
        && run.elapsed_s < LSB0_MAX_RUNTIME_S;
    r.check(
        id,
        name,
        pass,
        format!(
            "#M={} #N={} k={} DT acc {:.2}% (H={}) MLC acc {:.2}% (M={m}) runtime {:.2}s; need acc >= {:.0}%, M <= {LSB0_MAX_CONJUNCTS}, runtime < {LSB0_MAX_RUNTIME_S}s",
            run.dtree.num_attributes,
            run.dtree.num_traces,
            run.dtree.num_labels,
            dt * 100.0,
            run.dtree.tree_height.unwrap_or(0),
            mlc * 100.0,
            run.elapsed_s,
            LSB0_MIN_ACCURACY * 100.0
        ),
    );
}

fn random_instance(
    rng: &mut ChaCha8Rng,
    max_m: usize,
    max_n: usize,
) -> (Vec<Vec<bool>>, Vec<LabelDistribution>) {
    let m = rng.random_range(1..=max_m);
    let n = rng.random_range(1..=max_n);
    let density: f64 = rng.random_range(0.2..0.9);
    let preds = (0..n)
        .map(|_| (0..m).map(|_| rng.random_bool(density)).collect())
        .collect();
    let dists = (0..n)
        .map(|_| {
            let r: f64 = match rng.random_range(0..8) {
                0 => 0.0,
                1 => 1.0,
                2 => 0.5,
                _ => rng.random(),
            };
            LabelDistribution::new(vec![r, 1.0 - r]).unwrap()
        })
        .collect();
    (preds, dists)
}

fn refs<T>(v: &[Vec<T>]) -> Vec<&[T]> {
    v.iter().map(Vec::as_slice).collect()
}

/// Best log-likelihood over all 2^m conjunctions, computed from the raw
/// valuations: a trace keeps label 0 exactly when it satisfies the
/// conjunction.
fn enumerate_optimum(preds: &[Vec<bool>], dists: &[LabelDistribution]) -> f64 {
    let m = preds[0].len();
    let mut best = f64::NEG_INFINITY;
    for mask in 0u32..(1 << m) {
        let value = exact_sum(preds.iter().zip(dists).map(|(p, d)| {
            let satisfied = (0..m).all(|j| mask & (1 << j) == 0 || p[j]);
            if satisfied {
                clamped_ln(d.prob(0))
            } else {
                clamped_ln(d.prob(1))
            }
        }));
        if value > best {
            best = value;
        }
    }
    best
}

fn criterion_oracle(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let start = Instant::now();
    let mut mismatches = 0;
    let mut largest = (0, 0);
    for _ in 0..ORACLE_INSTANCES {
        let (preds, dists) = random_instance(&mut rng, 12, 50);
        let inst: IlpInstance = build_instance(&refs(&preds), &dists.iter().collect::<Vec<_>>(), 0);
        let sol = solve_two_label(&inst, &SolverOptions::default());
        let oracle = enumerate_optimum(&preds, &dists);
        if !sol.optimal || sol.log_likelihood.to_bits() != oracle.to_bits() {
            mismatches += 1;
        }
        largest = largest.max((preds[0].len(), preds.len()));
    }
    let secs = start.elapsed().as_secs_f64();
    r.check(
        "5",
        "oracle equivalence",
        mismatches == 0 && secs < ORACLE_MAX_S,
        format!(
            "{mismatches}/{ORACLE_INSTANCES} instances differ from 2^m enumeration (bitwise), largest m={} N={}, {secs:.2}s (limit {ORACLE_MAX_S}s)",
            largest.0, largest.1
        ),
    );
}

fn criterion_labeling(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for _ in 0..LABEL_TRIPLES {
        let k = rng.random_range(1..=10);
        let mut bounds: Vec<f64> = (0..k - 1).map(|_| rng.random_range(0.0..10.0)).collect();
        bounds.sort_by(f64::total_cmp);
        bounds.dedup();
        let summary = TimingSummary {
            mean_s: rng.random_range(-2.0..12.0),
            std_s: if rng.random_bool(0.1) {
                0.0
            } else {
                rng.random_range(1e-6..5.0)
            },
        };
        let d = weighted_labels(&summary, &bounds);
        worst = worst.max((d.probs().iter().sum::<f64>() - 1.0).abs());
    }
    let sym = weighted_labels(
        &TimingSummary {
            mean_s: 0.3,
            std_s: 0.05,
        },
        &[0.3],
    );
    let sym_err = (sym.prob(0) - 0.5).abs().max((sym.prob(1) - 0.5).abs());
    r.check(
        "6",
        "labeling normalization",
        worst <= LABEL_TOL && sym_err <= LABEL_TOL,
        format!(
            "{LABEL_TRIPLES} triples, worst |sum-1| = {worst:.2e}; boundary case ({:.12}, {:.12}); tolerance {LABEL_TOL:e}",
            sym.prob(0),
            sym.prob(1)
        ),
    );
}

fn criterion_preprocessing(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut mismatches = 0;
    for _ in 0..PREPROCESS_INSTANCES {
        let (mut preds, dists) = random_instance(&mut rng, 10, 30);
        // Duplicate and constant columns give preprocessing work to do.
        let m = preds[0].len();
        let dup = rng.random_range(0..m);
        let constant = rng.random_bool(0.5);
        for p in preds.iter_mut() {
            let v = p[dup];
            p.push(v);
            p.push(constant);
        }
        let inst = build_instance(&refs(&preds), &dists.iter().collect::<Vec<_>>(), 0);
        let direct = solve_two_label(&inst, &SolverOptions::default());
        let pre = solve_preprocessed(&inst, &SolverOptions::default());
        if direct.log_likelihood.to_bits() != pre.log_likelihood.to_bits() {
            mismatches += 1;
        }
    }
    r.check(
        "7",
        "preprocessing soundness",
        mismatches == 0,
        format!("{mismatches}/{PREPROCESS_INSTANCES} instances where preprocess-then-solve differs from solve (bitwise)"),
    );
}

/// Trains a tree on the whole dataset and counts training vectors where the
/// tree and its discriminant disagree.
fn tree_disagreements(data: &Dataset) -> (usize, usize) {
    let all: Vec<usize> = (0..data.len()).collect();
    let trained = train(data, &all, &Learner::DecisionTree(TreeParams::default()));
    let Model::Tree(tree) = &trained.model else {
        unreachable!()
    };
    let bad = all
        .iter()
        .filter(|&&i| {
            tree.predict(&data.counts[i]) != trained.discriminant.lab(data.observation(i))
        })
        .count();
    (bad, all.len())
}

/// Web-service style traces: a filter entry point plus one of two filter
/// implementations, with unrelated methods sprinkled in.
fn two_filter_corpus(seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: Vec<String> = (0..15).map(|i| format!("util.Helper{i}.run")).collect();
    let traces = (0..300)
        .map(|i| {
            let mut counts = vec![("app.Main.handle".to_string(), 1)];
            let base_s = match i % 3 {
                0 => 2.0,
                1 => {
                    counts.push(("snapservice.model.Filter.filter".into(), 1));
                    counts.push(("image.ChromeFilter.filter".into(), rng.random_range(1..4)));
                    7.5
                }
                _ => {
                    counts.push(("snapservice.model.Filter.filter".into(), 1));
                    counts.push((
                        "image.OilFilter.filterPixels".into(),
                        rng.random_range(1..4),
                    ));
                    15.7
                }
            };
            for n in &noise {
                if rng.random_bool(0.5) {
                    counts.push((n.clone(), rng.random_range(1..5)));
                }
            }
            let timings = (0..10)
                .map(|_| base_s + rng.random_range(-0.2..0.2))
                .collect();
            TraceRecord::new(format!("user-{i:03}"), counts, timings).unwrap()
        })
        .collect();
    Corpus::new(traces).unwrap()
}

fn shape_check(r: &mut Report) -> Dataset {
    let corpus = two_filter_corpus(11);
    let labels = label_corpus(&corpus, KChoice::default(), 11).unwrap();
    let data = Dataset::new(&corpus, &labels, &PredicateMode::CalledOnce).unwrap();
    let all: Vec<usize> = (0..data.len()).collect();
    let trained = train(&data, &all, &Learner::DecisionTree(TreeParams::default()));
    let Model::Tree(tree) = &trained.model else {
        unreachable!()
    };
    let mut top = Vec::new();
    if let Some(discriminer_core::dtree::TreeNode::Split {
        attribute,
        left,
        right,
        ..
    }) = tree.nodes.first()
    {
        top.push(*attribute);
        for child in [*left, *right] {
            if let discriminer_core::dtree::TreeNode::Split { attribute, .. } = &tree.nodes[child] {
                top.push(*attribute);
            }
        }
    }
    let names: Vec<&str> = top
        .iter()
        .map(|&a| data.attribute_names[a].as_str())
        .collect();
    let filters = [
        "snapservice.model.Filter.filter",
        "image.ChromeFilter.filter",
        "image.OilFilter.filterPixels",
    ];
    let pass = labels.k == 3 && !names.is_empty() && names.iter().all(|n| filters.contains(n));
    r.check(
        "shape",
        "two-filter tree shape",
        pass,
        format!("k={}, splits in top two levels: {names:?}", labels.k),
    );
    data
}

fn criterion_scalability(r: &mut Report) -> Dataset {
    let mut spec = BenchSpec::new(Family::pattern("1010101").unwrap(), 400, 4000, 4);
    spec.noise_std_ms = 1.0;
    let corpus = generate(&spec).unwrap();
    let labels = label_corpus(
        &corpus,
        KChoice::Auto {
            min: 2,
            max: MICRO_K_MAX,
        },
        4,
    )
    .unwrap();
    let data = Dataset::new(&corpus, &labels, &PredicateMode::CalledOnce).unwrap();
    let all: Vec<usize> = (0..data.len()).collect();

    let timed = |learner: Learner| {
        let mut times = Vec::new();
        let mut model = None;
        for _ in 0..SCALE_TIMING_RUNS {
            let start = Instant::now();
            model = Some(train(&data, &all, &learner));
            times.push(start.elapsed().as_secs_f64());
        }
        times.sort_by(f64::total_cmp);
        (model.unwrap(), times[times.len() / 2])
    };
    let (dt, dt_s) = timed(Learner::DecisionTree(TreeParams::default()));
    let (mlc, mlc_s) = timed(Learner::MaxLikelihood {
        time_limit: Some(SCALE_MLC_LIMIT),
    });
    let limit_hit = !mlc.optimal();
    let ratio = mlc_s / dt_s;
    r.check(
        "4",
        "scalability trend",
        dt_s < SCALE_DT_MAX_S && (ratio >= SCALE_MIN_RATIO || limit_hit),
        format!(
            "#M={} #N={} k={}, median of {SCALE_TIMING_RUNS} runs: DT {dt_s:.3}s (H={}), MLC {mlc_s:.3}s (M={}, optimal={}), ratio {ratio:.1}x; need DT < {SCALE_DT_MAX_S}s and ratio >= {SCALE_MIN_RATIO}x or {}s limit hit",
            data.attribute_names.len(),
            data.len(),
            data.num_labels,
            dt.tree_height().unwrap_or(0),
            mlc.max_conjuncts().unwrap_or(0),
            mlc.optimal(),
            SCALE_MLC_LIMIT.as_secs()
        ),
    );
    data
}

const PIPELINE_OUTPUTS: [&str; 8] = [
    "corpus.jsonl",
    "clusters.json",
    "clusters.csv",
    "tree.json",
    "tree.dot",
    "mlc.json",
    "summary-dtree.txt",
    "summary-mlc.txt",
];

fn pipeline(dir: &Path) {
    std::fs::create_dir_all(dir).unwrap();
    let steps: &[&[&str]] = &[
        &[
            "benchgen",
            "--family",
            "pat",
            "--pattern",
            "101",
            "--bits",
            "20",
            "--inputs",
            "200",
            "--seed",
            "42",
            "--out",
            "corpus.jsonl",
        ],
        &[
            "cluster",
            "--input",
            "corpus.jsonl",
            "--k",
            "auto",
            "--seed",
            "42",
            "--out",
            "clusters.json",
        ],
        &[
            "learn-dtree",
            "--input",
            "corpus.jsonl",
            "--labels",
            "clusters.json",
            "--out",
            "tree.json",
            "--dot",
            "tree.dot",
        ],
        &[
            "learn-mlc",
            "--input",
            "corpus.jsonl",
            "--labels",
            "clusters.json",
            "--out",
            "mlc.json",
        ],
        &[
            "eval",
            "--input",
            "corpus.jsonl",
            "--labels",
            "clusters.json",
            "--learner",
            "dtree",
            "--seed",
            "42",
            "--out",
            "eval-dtree.json",
        ],
        &[
            "eval",
            "--input",
            "corpus.jsonl",
            "--labels",
            "clusters.json",
            "--learner",
            "mlc",
            "--seed",
            "42",
            "--out",
            "eval-mlc.json",
        ],
        &[
            "report",
            "--labels",
            "clusters.json",
            "--model",
            "tree.json",
            "--eval",
            "eval-dtree.json",
            "--out",
            "summary-dtree.txt",
        ],
        &[
            "report",
            "--labels",
            "clusters.json",
            "--model",
            "mlc.json",
            "--eval",
            "eval-mlc.json",
            "--out",
            "summary-mlc.txt",
        ],
    ];
    for args in steps {
        run(dir, args);
    }
}

fn criterion_determinism(r: &mut Report, root: &Path) {
    let a = root.join("run-a");
    let b = root.join("run-b");
    pipeline(&a);
    pipeline(&b);
    let mut differing: Vec<String> = PIPELINE_OUTPUTS
        .iter()
        .filter(|f| std::fs::read(a.join(f)).unwrap() != std::fs::read(b.join(f)).unwrap())
        .map(|f| f.to_string())
        .collect();
    for f in ["eval-dtree.json", "eval-mlc.json"] {
        if read_eval(&a.join(f)).without_timings() != read_eval(&b.join(f)).without_timings() {
            differing.push(format!("{f} (timings masked)"));
        }
    }
    r.check(
        "9",
        "determinism",
        differing.is_empty(),
        format!(
            "{} artifacts byte-compared plus 2 eval reports with timings masked; differing: {differing:?}",
            PIPELINE_OUTPUTS.len()
        ),
    );
}

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let mut r = Report { failed: 0 };

    let lsb0 = micro(
        root,
        "lsb0",
        &["--family", "lsb0", "--bits", "10", "--inputs", "188"],
        "1",
    );
    lsb_msb_check(&mut r, "1", "LSB0 reproduction", &lsb0);
    let msb0 = micro(
        root,
        "msb0",
        &["--family", "msb0", "--bits", "10", "--inputs", "188"],
        "2",
    );
    lsb_msb_check(&mut r, "2", "MSB0 reproduction", &msb0);

    let pats: Vec<MicroRun> = PAT101_SEEDS
        .map(|seed| {
            let seed = seed.to_string();
            micro(
                root,
                &format!("pat101-{seed}"),
                &[
                    "--family",
                    "pat",
                    "--pattern",
                    "101",
                    "--bits",
                    "20",
                    "--inputs",
                    "200",
                ],
                &seed,
            )
        })
        .collect();
    let n = pats.len() as f64;
    let dt = pats.iter().map(|p| p.dtree.accuracy).sum::<f64>() / n;
    let mlc_each: Vec<f64> = pats.iter().map(|p| p.mlc.accuracy).collect();
    let mlc = mlc_each.iter().sum::<f64>() / n;
    let dt_learn = pats
        .iter()
        .map(|p| p.dtree.total_learn_time_s)
        .fold(0.0, f64::max);
    let pat = &pats[0];
    r.check(
        "3",
        "Pat_101 reproduction",
        dt >= PAT101_DT_MIN_ACCURACY
            && (mlc - PAT101_MLC_TARGET).abs() <= PAT101_MLC_BAND
            && dt_learn < PAT101_DT_MAX_LEARN_S,
        format!(
            "#M={} #N={}, mean over seeds {}..={}: DT acc {:.2}%, MLC acc {:.2}% (per seed {}), slowest DT learn {dt_learn:.4}s over 20 folds; need DT >= {:.0}%, MLC in [{:.1}%, {:.1}%], DT learn < {PAT101_DT_MAX_LEARN_S}s",
            pat.dtree.num_attributes,
            pat.dtree.num_traces,
            PAT101_SEEDS.start(),
            PAT101_SEEDS.end(),
            dt * 100.0,
            mlc * 100.0,
            mlc_each.iter().map(|a| format!("{:.1}", a * 100.0)).collect::<Vec<_>>().join("/"),
            PAT101_DT_MIN_ACCURACY * 100.0,
            (PAT101_MLC_TARGET - PAT101_MLC_BAND) * 100.0,
            (PAT101_MLC_TARGET + PAT101_MLC_BAND) * 100.0
        ),
    );

    let big = criterion_scalability(&mut r);
    criterion_oracle(&mut r);
    criterion_labeling(&mut r);
    criterion_preprocessing(&mut r);
    let filters = shape_check(&mut r);

    let mut agreement = Vec::new();
    let mut all_agree = true;
    let corpora = [
        ("lsb0", load_dataset(&lsb0.dir)),
        ("msb0", load_dataset(&msb0.dir)),
        ("pat101", load_dataset(&pats[0].dir)),
        ("pat1010101", big),
        ("two-filter", filters),
    ];
    for (name, data) in &corpora {
        let (bad, n) = tree_disagreements(data);
        all_agree &= bad == 0;
        agreement.push(format!("{name} {}/{n}", n - bad));
    }
    r.check(
        "8",
        "tree/discriminant agreement",
        all_agree,
        agreement.join(", "),
    );

    criterion_determinism(&mut r, root);

    println!("{} criteria failed", r.failed);
    if r.failed > 0 {
        std::process::exit(1);
    }
}
