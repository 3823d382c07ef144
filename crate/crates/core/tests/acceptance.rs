//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ise_core::actor::plan_to_action;
use ise_core::encoders::{pca_fit, BlockMeanEncoder, PcaProjection, RawEmbedding, StateEmbedding};
use ise_core::envs::{EnvInstance, EnvKind};
use ise_core::generator::{GeneratorMode, KernelGenerator, SupportEntry};
use ise_core::refinement::{refine_embedding, InitMode, RefineConfig};
use ise_core::rejection::{nearest_failed_distance, push_failed, select_plan, FailedPlanBuffer, RejectionMetric};
use ise_core::replan::{
    ablation_sweep, plan_quality, read_episodes_csv, run_experiment, EpisodeRow, ExperimentFile, Method,
    ResultsTable, Sweep, EPISODES_CSV,
};
use ise_core::retrieval::{
    retrieval_probabilities, retrieve_object, BufferPolicy, DistanceMetric, EmbeddingTable, RetrievalConfig,
    TableEntry,
};
use ise_core::video::{Frame, Video, FRAME_SIZE, PLAN_FRAMES};

const MASTER_SEED: u64 = 0;
const TRIALS: usize = 400;

// Tolerances and budgets.
const PROB_TOL: f64 = 1e-9;
const ORACLE_INSTANCES: usize = 1000;
const SAMPLING_DRAWS: usize = 100_000;
const PCA_MATRICES: usize = 20;
const PCA_PROJ_TOL: f64 = 1e-6;
const PCA_ORTHO_TOL: f64 = 1e-8;
const GT_INSTANCES: usize = 65;
const RANDOM_TWO_MODE: (f64, f64) = (1.85, 2.15);
const OURS_TWO_MODE: (f64, f64) = (1.40, 1.65);
const CANDIDATE_SPREAD: f64 = 0.10;
const REFINE_LOSS: f64 = 1e-3;
const REFINE_SEEDS: usize = 20;
const REFINE_REQUIRED: usize = 18;
const BUDGET_ORACLE: Duration = Duration::from_secs(10);
const BUDGET_GT: Duration = Duration::from_secs(5);
const BUDGET_TWO_MODE: Duration = Duration::from_secs(120);
const BUDGET_CONTINUOUS: Duration = Duration::from_secs(600);
const BUDGET_SUITE: Duration = Duration::from_secs(900);

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict { pass, detail: detail.into() }
    }
}

fn gap_ok(a: &ise_core::replan::ResultsCell, b: &ise_core::replan::ResultsCell) -> bool {
    b.mean - a.mean > 2.0 * (a.sem + b.sem)
}

// ---------------------------------------------------------------- oracles

fn oracle_block_means(v: &Video) -> Vec<f64> {
    let mut out = Vec::new();
    for f in v.frames() {
        for br in 0..8 {
            for bc in 0..8 {
                let mut s = 0.0;
                for r in 0..4 {
                    for c in 0..4 {
                        s += f64::from(f.get(br * 4 + r, bc * 4 + c));
                    }
                }
                out.push(s / 16.0);
            }
        }
    }
    out
}

fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn oracle_pixel_l2(a: &Video, b: &Video) -> f64 {
    let mut s = 0.0;
    for (fa, fb) in a.frames().iter().zip(b.frames()) {
        for (x, y) in fa.pixels().iter().zip(fb.pixels()) {
            let d = f64::from(*x) - f64::from(*y);
            s += d * d;
        }
    }
    s.sqrt()
}

fn random_video(rng: &mut ChaCha8Rng) -> Video {
    let data: Vec<f32> = (0..PLAN_FRAMES * FRAME_SIZE * FRAME_SIZE).map(|_| rng.random()).collect();
    Video::from_flat(PLAN_FRAMES, FRAME_SIZE, FRAME_SIZE, &data).unwrap()
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let (u, v): (f64, f64) = (rng.random_range(f64::EPSILON..1.0), rng.random());
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
#[allow(clippy::needless_range_loop)]
fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j].powi(2)).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let values = (0..n).map(|i| a[i][i]).collect();
    let vectors = (0..n).map(|j| (0..n).map(|i| v[i][j]).collect()).collect();
    (values, vectors)
}

// ------------------------------------------------------------- criteria

fn retrieval_table(rng: &mut ChaCha8Rng, objects: usize, per_object: usize, k: usize) -> EmbeddingTable {
    let d = PLAN_FRAMES * 64;
    let projection = PcaProjection {
        mean: vec![0.5; d],
        components: (0..k).map(|_| (0..d).map(|_| 0.05 * gaussian(rng)).collect()).collect(),
        k,
        explained_variance: vec![1.0; k],
        degenerate: false,
    };
    let canonical: Vec<StateEmbedding> =
        (0..objects).map(|_| StateEmbedding((0..k).map(|_| gaussian(rng)).collect())).collect();
    let mut entries = Vec::new();
    for (o, c) in canonical.iter().enumerate() {
        for r in 0..per_object {
            let embedding = if r == 0 {
                c.clone()
            } else {
                StateEmbedding((0..k).map(|_| gaussian(rng)).collect())
            };
            entries.push(TableEntry { object: o, success: r == 0, embedding });
        }
    }
    let names = (0..objects).map(|o| format!("obj{o}")).collect();
    EmbeddingTable::from_parts(names, canonical, entries, projection).unwrap()
}

fn oracle_probabilities(table: &EmbeddingTable, query: &Video, tau: f64) -> Vec<f64> {
    let raw = oracle_block_means(query);
    let p = table.projection();
    let e: Vec<f64> =
        p.components.iter().map(|c| c.iter().zip(&raw).zip(&p.mean).map(|((w, x), m)| w * (x - m)).sum()).collect();
    let w: Vec<f64> = table.entries().iter().map(|t| (-l2(&e, t.embedding.values()) / tau).exp()).collect();
    let z: f64 = w.iter().sum();
    w.iter().map(|x| x / z).collect()
}

fn criterion_1() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for _ in 0..ORACLE_INSTANCES {
        let objects = rng.random_range(2..8);
        let per = rng.random_range(1..4);
        let k = rng.random_range(2..6);
        let table = retrieval_table(&mut rng, objects, per, k);
        let tau = rng.random_range(0.3..3.0);
        let query = random_video(&mut rng);
        let cfg = RetrievalConfig::new(DistanceMetric::L2, tau, BufferPolicy::Latest).unwrap();
        let got = retrieval_probabilities(&table, &BlockMeanEncoder, std::slice::from_ref(&query), &cfg).unwrap();
        for (a, b) in got.iter().zip(oracle_probabilities(&table, &query, tau)) {
            worst = worst.max((a - b).abs());
        }
    }

    // one entry per object so sampled objects are sampled entries
    let table = retrieval_table(&mut rng, 5, 1, 3);
    let query = random_video(&mut rng);
    let tau = 2.0;
    let p = oracle_probabilities(&table, &query, tau);
    let cfg = RetrievalConfig::new(DistanceMetric::L2, tau, BufferPolicy::Latest).unwrap();
    let mut counts = vec![0usize; p.len()];
    let mut draw_rng = ChaCha8Rng::seed_from_u64(102);
    let buffer = [query];
    for _ in 0..SAMPLING_DRAWS {
        counts[retrieve_object(&table, &BlockMeanEncoder, &buffer, &cfg, &mut draw_rng).unwrap()] +=
            1;
    }
    let n = SAMPLING_DRAWS as f64;
    let worst_sigma = counts
        .iter()
        .zip(&p)
        .map(|(&c, &pi)| (c as f64 - n * pi).abs() / (n * pi * (1.0 - pi)).sqrt().max(1e-12))
        .fold(0.0, f64::max);
    Verdict::new(
        worst <= PROB_TOL && worst_sigma <= 3.0,
        format!("max |p - oracle| = {worst:.2e} over {ORACLE_INSTANCES} instances; worst deviation {worst_sigma:.2} sigma over {SAMPLING_DRAWS} draws, min p = {:.3}", p.iter().cloned().fold(1.0, f64::min)),
    )
}

fn brute_force_select(cands: &[Video], buf: &[Video], metric: RejectionMetric) -> usize {
    let dist = |a: &Video, b: &Video| match metric {
        RejectionMetric::RawPixel => oracle_pixel_l2(a, b),
        RejectionMetric::Embedding => l2(&oracle_block_means(a), &oracle_block_means(b)),
    };
    let mut best = 0;
    let mut best_d = f64::NEG_INFINITY;
    for (i, c) in cands.iter().enumerate() {
        let mut m = f64::INFINITY;
        for f in buf {
            let d = dist(c, f);
            if d < m {
                m = d;
            }
        }
        if m > best_d {
            best_d = m;
            best = i;
        }
    }
    best
}

fn criterion_2() -> Verdict {
    let enc = BlockMeanEncoder;
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut mismatches = 0;
    for i in 0..ORACLE_INSTANCES {
        let cands: Vec<Video> = (0..rng.random_range(1..=5)).map(|_| random_video(&mut rng)).collect();
        let failed: Vec<Video> = (0..rng.random_range(0..=5)).map(|_| random_video(&mut rng)).collect();
        let metric = if i % 2 == 0 { RejectionMetric::RawPixel } else { RejectionMetric::Embedding };
        let mut buf = FailedPlanBuffer::new();
        for f in &failed {
            push_failed(&mut buf, f.clone()).unwrap();
        }
        if select_plan(&cands, &buf, metric, &enc).unwrap().0 != brute_force_select(&cands, &failed, metric) {
            mismatches += 1;
        }
    }

    let mut exact = Vec::new();
    // empty buffer picks the first candidate and reports +inf
    let cands: Vec<Video> = (0..3).map(|_| random_video(&mut rng)).collect();
    let empty = FailedPlanBuffer::new();
    exact.push(select_plan(&cands, &empty, RejectionMetric::RawPixel, &enc).unwrap().0 == 0);
    exact.push(nearest_failed_distance(&cands[1], &empty, RejectionMetric::RawPixel, &enc).unwrap() == f64::INFINITY);
    // identical candidates tie to index 0
    let same = vec![cands[0].clone(); 4];
    let mut buf = FailedPlanBuffer::new();
    push_failed(&mut buf, cands[1].clone()).unwrap();
    exact.push(select_plan(&same, &buf, RejectionMetric::RawPixel, &enc).unwrap().0 == 0);
    // a duplicate of the best candidate later in the list loses the tie
    let far = Video::new(vec![Frame::filled(32, 32, 1.0).unwrap(); PLAN_FRAMES]).unwrap();
    let near = Video::new(vec![Frame::filled(32, 32, 0.1).unwrap(); PLAN_FRAMES]).unwrap();
    let zero = Video::new(vec![Frame::zeros(32, 32); PLAN_FRAMES]).unwrap();
    let mut zbuf = FailedPlanBuffer::new();
    push_failed(&mut zbuf, zero).unwrap();
    let picks = [near.clone(), far.clone(), near, far];
    exact.push(select_plan(&picks, &zbuf, RejectionMetric::RawPixel, &enc).unwrap().0 == 1);
    let exact_ok = exact.iter().all(|&b| b);
    Verdict::new(
        mismatches == 0 && exact_ok,
        format!("{mismatches} mismatches over {ORACLE_INSTANCES} instances; empty-buffer and tie cases {}", if exact_ok { "exact" } else { "WRONG" }),
    )
}

fn criterion_3() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let (mut worst_proj, mut worst_ortho) = (0.0f64, 0.0f64);
    for m in 0..PCA_MATRICES {
        // alternate tall and wide sample matrices
        let (n, d) = if m % 2 == 0 { (rng.random_range(8..20), rng.random_range(2..7)) } else { (rng.random_range(4..8), rng.random_range(8..14)) };
        let scales: Vec<f64> = (0..d).map(|j| 1.0 + j as f64).collect();
        let samples: Vec<RawEmbedding> =
            (0..n).map(|_| RawEmbedding(scales.iter().map(|s| s * gaussian(&mut rng)).collect())).collect();
        let k = d.min(n - 1);
        let p = pca_fit(&samples, k).unwrap();

        let mean: Vec<f64> = (0..d).map(|j| samples.iter().map(|s| s.0[j]).sum::<f64>() / n as f64).collect();
        let cov: Vec<Vec<f64>> = (0..d)
            .map(|a| {
                (0..d)
                    .map(|b| samples.iter().map(|s| (s.0[a] - mean[a]) * (s.0[b] - mean[b])).sum::<f64>() / (n - 1) as f64)
                    .collect()
            })
            .collect();
        let (vals, vecs) = jacobi_eigen(cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
        let oracle: Vec<Vec<f64>> = order
            .iter()
            .take(k)
            .map(|&i| {
                let v = &vecs[i];
                let big = v.iter().cloned().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
                v.iter().map(|x| if big < 0.0 { -x } else { *x }).collect()
            })
            .collect();
        for s in &samples {
            let got = p.apply(s).unwrap();
            for (c, g) in oracle.iter().zip(got.values()) {
                let want: f64 = c.iter().zip(&s.0).zip(&mean).map(|((w, x), mu)| w * (x - mu)).sum();
                worst_proj = worst_proj.max((want - g).abs());
            }
        }
        for i in 0..k {
            for j in 0..k {
                let dot: f64 = p.components[i].iter().zip(&p.components[j]).map(|(a, b)| a * b).sum();
                worst_ortho = worst_ortho.max((dot - f64::from(u8::from(i == j))).abs());
            }
        }
    }
    Verdict::new(
        worst_proj <= PCA_PROJ_TOL && worst_ortho <= PCA_ORTHO_TOL,
        format!("max projection error {worst_proj:.2e}, max orthonormality error {worst_ortho:.2e} over {PCA_MATRICES} matrices"),
    )
}

fn criterion_4() -> Verdict {
    let mut total = 0;
    let mut ok = 0;
    for kind in EnvKind::ALL {
        for theta in kind.theta_table() {
            total += 1;
            let env = EnvInstance::new(kind, theta).unwrap();
            let plan = env.ground_truth_plan();
            if let Ok(action) = plan_to_action(kind, &plan) {
                if env.execute(&action).map(|o| o.success).unwrap_or(false) {
                    ok += 1;
                }
            }
        }
    }
    Verdict::new(total == GT_INSTANCES && ok == total, format!("{ok}/{total} instances succeed"))
}

fn criterion_5() -> Verdict {
    let tasks = vec![EnvKind::OpenBox, EnvKind::TurnFaucet];
    let exp = ExperimentFile::new(tasks.clone(), vec![Method::Random, Method::Avdc, Method::Ours], TRIALS, MASTER_SEED);
    let out = run_experiment(&exp, false).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for t in tasks {
        let r = out.table.cell(Method::Random, t).unwrap();
        let a = out.table.cell(Method::Avdc, t).unwrap();
        let o = out.table.cell(Method::Ours, t).unwrap();
        pass &= r.mean >= RANDOM_TWO_MODE.0 && r.mean <= RANDOM_TWO_MODE.1;
        pass &= o.mean >= OURS_TWO_MODE.0 && o.mean <= OURS_TWO_MODE.1;
        pass &= gap_ok(o, a);
        parts.push(format!(
            "{t}: random {:.3}, avdc {:.3}±{:.3}, ours {:.3}±{:.3}",
            r.mean, a.mean, a.sem, o.mean, o.sem
        ));
        if t == EnvKind::OpenBox {
            let within2 = out.rows.iter().filter(|x| x.task == t && x.method == Method::Ours && x.replans <= 2).count();
            parts.push(format!("(openbox ours <= 2 replans in {:.1}% of trials)", 100.0 * within2 as f64 / TRIALS as f64));
        }
    }
    Verdict::new(pass, parts.join("; "))
}

struct SuiteRuns {
    rows: Vec<EpisodeRow>,
    identical: bool,
    elapsed: [Duration; 2],
}

fn run_cli_suite(dir: &Path) -> SuiteRuns {
    let exp = ExperimentFile::new(EnvKind::ALL.to_vec(), Method::ALL.to_vec(), TRIALS, MASTER_SEED);
    let exp_path = dir.join("experiment.json");
    std::fs::write(&exp_path, serde_json::to_vec_pretty(&exp).unwrap()).unwrap();
    let mut outs: Vec<PathBuf> = Vec::new();
    let mut elapsed = [Duration::ZERO; 2];
    for (i, slot) in elapsed.iter_mut().enumerate() {
        let out = dir.join(format!("run{i}"));
        let t = Instant::now();
        let status = Command::new(env!("CARGO_BIN_EXE_ise"))
            .args(["run", "--experiment"])
            .arg(&exp_path)
            .arg("--out")
            .arg(&out)
            .stdout(std::process::Stdio::null())
            .status()
            .unwrap();
        *slot = t.elapsed();
        assert!(status.success(), "ise run failed");
        outs.push(out);
    }
    let a = std::fs::read(outs[0].join(EPISODES_CSV)).unwrap();
    let b = std::fs::read(outs[1].join(EPISODES_CSV)).unwrap();
    let ra = std::fs::read(outs[0].join("results.csv")).unwrap();
    let rb = std::fs::read(outs[1].join("results.csv")).unwrap();
    SuiteRuns { rows: read_episodes_csv(&outs[0].join(EPISODES_CSV)).unwrap(), identical: a == b && ra == rb, elapsed }
}

fn criterion_6(suite: &SuiteRuns) -> Verdict {
    let table = ResultsTable::from_rows(&suite.rows);
    let mut pass = true;
    let mut parts = Vec::new();
    for t in [EnvKind::PushBar, EnvKind::PickBar, EnvKind::SlideBrick] {
        let a = table.cell(Method::Avdc, t).unwrap();
        let o = table.cell(Method::Ours, t).unwrap();
        pass &= gap_ok(o, a);
        parts.push(format!("{t}: ours {:.2}±{:.2} vs avdc {:.2}±{:.2}", o.mean, o.sem, a.mean, a.sem));
    }
    let norm = |m| table.normalized(m).unwrap();
    let (o, r, a) = (norm(Method::Ours), norm(Method::OursRefine), norm(Method::Avdc));
    pass &= o < r && r < a;
    pass &= suite.elapsed[0] <= BUDGET_CONTINUOUS;
    parts.push(format!("normalized ours {o:.2} < ours_refine {r:.2} < avdc {a:.2}"));
    parts.push(format!("one full run {:.1} s", suite.elapsed[0].as_secs_f64()));
    Verdict::new(pass, parts.join("; "))
}

fn criterion_7() -> Verdict {
    let base = ExperimentFile::new(EnvKind::ALL.to_vec(), vec![Method::Ours], TRIALS, MASTER_SEED);
    let avg = |p: &ise_core::replan::AblationPoint, m: Method| p.table.task_average(m).unwrap();
    let mut parts = Vec::new();

    let n = ablation_sweep(&base, Sweep::Candidates).unwrap();
    let means: Vec<f64> = n.iter().map(|p| avg(p, Method::Ours)).collect();
    let tail = &means[1..];
    let (lo, hi) = tail.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &x| (l.min(x), h.max(x)));
    let n_ok = means[1] < means[0] && hi <= lo * (1.0 + CANDIDATE_SPREAD);
    parts.push(format!(
        "n=1..5 means {} (n=2 saves {:.1}%, spread {:.1}%)",
        means.iter().map(|m| format!("{m:.3}")).collect::<Vec<_>>().join("/"),
        100.0 * (1.0 - means[1] / means[0]),
        100.0 * (hi / lo - 1.0)
    ));

    let modules = ablation_sweep(&base, Sweep::Modules).unwrap();
    let by = |m: Method| modules.iter().find(|p| p.table.methods == vec![m]).map(|p| avg(p, m)).unwrap();
    let (av, rej, ret, ours) = (by(Method::Avdc), by(Method::AvdcRejection), by(Method::AvdcRetrieval), by(Method::Ours));
    let mod_ok = rej < av && ret < av && ours < rej && ours < ret;
    parts.push(format!("modules avdc {av:.3}, +rejection {rej:.3}, +retrieval {ret:.3}, ours {ours:.3}"));

    let metric = ablation_sweep(&base, Sweep::Metric).unwrap();
    let (raw, emb) = (avg(&metric[0], Method::Ours), avg(&metric[1], Method::Ours));
    let per_task = base
        .tasks
        .iter()
        .filter(|&&t| {
            metric[0].table.cell(Method::Ours, t).unwrap().mean <= metric[1].table.cell(Method::Ours, t).unwrap().mean
        })
        .count();
    let metric_ok = raw <= emb;
    parts.push(format!("raw-pixel {raw:.3} vs embedding {emb:.3} (raw <= embedding on {per_task}/5 tasks)"));

    let failed: Vec<&str> = [("n sweep", n_ok), ("modules", mod_ok), ("metric", metric_ok)]
        .iter()
        .filter(|x| !x.1)
        .map(|x| x.0)
        .collect();
    if !failed.is_empty() {
        parts.push(format!("failing: {}", failed.join(", ")));
    }
    Verdict::new(n_ok && mod_ok && metric_ok, parts.join("; "))
}

fn planted_generator() -> (KernelGenerator, Vec<[f64; 3]>) {
    let f0 = Frame::zeros(32, 32);
    let canon = vec![[0.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 2.0, 0.0]];
    let mut support = Vec::new();
    for (o, c) in canon.iter().enumerate() {
        for rep in 0..2 {
            let mut frames = vec![f0.clone()];
            for t in 1..PLAN_FRAMES {
                let px: Vec<f32> = (0..1024)
                    .map(|i| if (i / 32) / 11 == o { (0.3 + 0.1 * t as f32 + 0.05 * rep as f32).min(1.0) } else { 0.0 })
                    .collect();
                frames.push(Frame::new(32, 32, px).unwrap());
            }
            support.push(SupportEntry {
                video: Arc::new(Video::new(frames).unwrap()),
                object: o,
                canonical: StateEmbedding(c.to_vec()),
                first_frame: vec![0.0; 64],
            });
        }
    }
    (KernelGenerator::new(GeneratorMode::Identification, support, 1.0).unwrap(), canon)
}

fn criterion_8() -> Verdict {
    let (g, canon) = planted_generator();
    let f0 = Frame::zeros(32, 32);
    let mut recovered = 0;
    let (mut random_iters, mut combined_iters) = (Vec::new(), Vec::new());
    for seed in 0..REFINE_SEEDS as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(800 + seed);
        let object = (seed % 3) as usize;
        let planted: Vec<f64> = canon[object].iter().map(|c| c + 0.1 * gaussian(&mut rng)).collect();
        let observed = g.id_generate(&f0, &StateEmbedding(planted)).unwrap();
        let cfg = RefineConfig::for_bandwidth(g.bandwidth(), InitMode::Random);
        let out = refine_embedding(&g, &observed, None, &cfg, &mut rng).unwrap();
        let e = out.embedding.values();
        let nearest = (0..3).min_by(|&a, &b| l2(e, &canon[a]).total_cmp(&l2(e, &canon[b]))).unwrap();
        if out.loss < REFINE_LOSS && nearest == object {
            recovered += 1;
        }
        random_iters.push(out.iterations_to(REFINE_LOSS).unwrap_or(usize::MAX));
        let warm = StateEmbedding(canon[object].to_vec());
        let ccfg = RefineConfig::for_bandwidth(g.bandwidth(), InitMode::Combined);
        let cout = refine_embedding(&g, &observed, Some(&warm), &ccfg, &mut rng).unwrap();
        combined_iters.push(cout.iterations_to(REFINE_LOSS).unwrap_or(usize::MAX));
    }
    let median = |v: &mut Vec<usize>| {
        v.sort_unstable();
        v[v.len() / 2]
    };
    let (mr, mc) = (median(&mut random_iters), median(&mut combined_iters));
    Verdict::new(
        recovered >= REFINE_REQUIRED,
        format!("{recovered}/{REFINE_SEEDS} seeds recovered; median trace steps to loss < 1e-3: random {mr}, combined {mc}"),
    )
}

fn criterion_9(suite: &SuiteRuns) -> Verdict {
    let q = plan_quality(&suite.rows);
    let get = |m| q.iter().find(|x| x.method == m).unwrap();
    let (o, a) = (get(Method::Ours), get(Method::Avdc));
    Verdict::new(
        o.mean_psnr > a.mean_psnr && o.mean_ssim > a.mean_ssim,
        format!(
            "ours psnr {:.3} ssim {:.4} vs avdc psnr {:.3} ssim {:.4} ({} / {} plans)",
            o.mean_psnr, o.mean_ssim, a.mean_psnr, a.mean_ssim, o.plans, a.plans
        ),
    )
}

fn criterion_10(suite: &SuiteRuns) -> Verdict {
    let slowest = suite.elapsed.iter().max().unwrap();
    Verdict::new(
        suite.identical && *slowest <= BUDGET_SUITE,
        format!(
            "episodes.csv {} across runs; 5 tasks x 6 methods x {TRIALS} trials took {:.1} s and {:.1} s on {} thread(s)",
            if suite.identical { "bit-identical" } else { "DIFFERS" },
            suite.elapsed[0].as_secs_f64(),
            suite.elapsed[1].as_secs_f64(),
            std::thread::available_parallelism().map_or(1, |n| n.get())
        ),
    )
}

fn report(id: u32, name: &str, budget: Option<Duration>, f: impl FnOnce() -> Verdict) -> bool {
    let t = Instant::now();
    let mut v = f();
    let dt = t.elapsed();
    if let Some(b) = budget {
        if dt > b {
            v.pass = false;
            v.detail.push_str(&format!("; over the {:.0} s budget", b.as_secs_f64()));
        }
    }
    println!(
        "criterion {id:>2} {name:<28} {} ({:.1} s) {}",
        if v.pass { "PASS" } else { "FAIL" },
        dt.as_secs_f64(),
        v.detail
    );
    v.pass
}

fn main() {
    // `--list` and name filters that exclude this target skip the heavy runs
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let filters: Vec<&String> = args.iter().filter(|a| !a.starts_with('-')).collect();
    if !filters.is_empty() && !filters.iter().any(|f| "acceptance".contains(f.as_str())) {
        return;
    }

    let dir = tempfile::tempdir().unwrap();
    let mut suite: Option<SuiteRuns> = None;
    let mut results = Vec::new();
    results.push(report(1, "retrieval oracle", Some(BUDGET_ORACLE), criterion_1));
    results.push(report(2, "rejection oracle", Some(BUDGET_ORACLE), criterion_2));
    results.push(report(3, "pca oracle", None, criterion_3));
    results.push(report(4, "scripted plans succeed", Some(BUDGET_GT), criterion_4));
    results.push(report(5, "two-mode tasks", Some(BUDGET_TWO_MODE), criterion_5));
    results.push(report(6, "continuous tasks", None, || {
        let s = suite.insert(run_cli_suite(dir.path()));
        criterion_6(s)
    }));
    results.push(report(7, "ablation orderings", None, criterion_7));
    results.push(report(8, "planted refinement", None, criterion_8));
    let suite = suite.expect("suite ran for criterion 6");
    results.push(report(9, "plan quality", None, || criterion_9(&suite)));
    results.push(report(10, "reproducibility", None, || criterion_10(&suite)));

    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
