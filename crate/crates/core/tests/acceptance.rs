//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Directional criteria run on seeds 100..105, which were not used
//! when choosing defaults.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use cml_core::curriculum::{task_similarity, EmbeddingTable};
use cml_core::datasets::{generate_synthetic, RelationCluster, RunOrder, SynthConfig};
use cml_core::eval::{
    all_permutations, average_accuracy, error_bound, forgetting_rate, mean, position_avg_accuracy,
    run_permutation_study, spearman, StudyContext, StudyMode, RUN_STREAM_BASE,
};
use cml_core::kgembed::{
    concept_pairs, corrupt, load_relation_embeddings, ConceptConfig, ConceptModel, TransEConfig, TransEModel,
};
use cml_core::learner::{train_sequence, ExtractorModel, ModelConfig, Strategy, TrainConfig};
use cml_core::numerics::{cosine_similarity, finite_diff_check, load_checkpoint, Rng};
use cml_core::pipeline::rundir::SYNTH_STREAM;
use cml_core::pipeline::{cmd_pipeline, load_kg, ExperimentConfig, Paths, Pipeline};
use cml_core::Result;

const SEEDS: [u64; 5] = [100, 101, 102, 103, 104];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn config(seed: u64, strategy: Strategy) -> ExperimentConfig {
    let mut c = ExperimentConfig { base_seed: seed, ..ExperimentConfig::default() };
    c.train.strategy = strategy;
    c
}

/// Runs shared by criteria 4, 6, 7 and 8: a CML pipeline per seed, plus
/// vanilla and replay on the same data.
struct DefaultRuns {
    root: PathBuf,
}

impl DefaultRuns {
    fn cml_dir(&self, seed: u64) -> PathBuf {
        self.root.join(format!("cml-{seed}"))
    }

    fn with_data(&self, seed: u64, strategy: Strategy) -> ExperimentConfig {
        let mut c = config(seed, strategy);
        c.paths = Paths {
            data: Some(self.cml_dir(seed).join("data")),
            embeddings: Some(self.cml_dir(seed).join("embeddings.tsv")),
            ..Paths::default()
        };
        c
    }
}

fn c1_gradients() -> Result<Outcome> {
    let synth = SynthConfig { tasks: 2, relations_per_task: 3, train_per_relation: 4, test_per_relation: 2, ..SynthConfig::default() };
    let out = generate_synthetic(&synth, &mut Rng::new(1, 0))?;

    let mc = ModelConfig { embedding_dim: 12, hidden_dim: 10, output_dim: 8, ..ModelConfig::default() };
    let mut model = ExtractorModel::new(&out.benchmark, &mc, &mut Rng::new(2, 0))?;
    let inst = out.benchmark.tasks[0].train[0].clone();
    let cands = out.benchmark.tasks[0].relations.clone();
    let e_model = finite_diff_check(&mut model, |m: &mut ExtractorModel| m.loss_backward(std::slice::from_ref(&inst), &cands, 1.0).unwrap(), 1e-6);

    let cc = ConceptConfig { d1: 8, d2: 6, concept_dim: 5, ..ConceptConfig::default() };
    let mut concept = ConceptModel::init(&out.kg, &cc, None, &mut Rng::new(3, 0))?;
    let pair = concept_pairs(&out.kg)?[0].clone();
    let e_concept = finite_diff_check(&mut concept, |m: &mut ConceptModel| m.nll_backward(std::slice::from_ref(&pair), 1.0).unwrap(), 1e-5);

    let tc = TransEConfig { dim: 16, ..TransEConfig::default() };
    let mut transe = TransEModel::init(out.kg.num_entities(), out.kg.num_relations(), &tc, &mut Rng::new(4, 0));
    let pos = out.kg.triples[0];
    let mut rng = Rng::new(5, 0);
    let neg = loop {
        let n = corrupt(pos, out.kg.num_entities(), &mut rng);
        // The check needs an active hinge; inactive pairs have zero gradient.
        if transe.margin_loss(pos, n, 0.0)? > 0.0 {
            break n;
        }
    };
    let e_transe = finite_diff_check(&mut transe, |m: &mut TransEModel| m.margin_loss(pos, neg, 1.0).unwrap(), 1e-5);

    let worst = e_model.max(e_concept).max(e_transe);
    outcome(
        worst < 1e-4,
        format!("max rel err extractor {e_model:.2e}, concept {e_concept:.2e}, transe {e_transe:.2e}"),
    )
}

fn c2_formulas() -> Result<Outcome> {
    let out = generate_synthetic(&SynthConfig::default(), &mut Rng::new(7, 0))?;
    let table = EmbeddingTable::from_pairs(out.relations.iter().enumerate().map(|(i, r)| {
        let mut v = Rng::new(8, i as u64);
        (r.clone(), (0..6).map(|_| rand::Rng::gen_range(&mut v, -1.0..1.0)).collect())
    }));
    let groups: Vec<Vec<String>> = out.benchmark.tasks.iter().map(|t| t.relations.clone()).collect();
    let mut worst = 0.0f64;
    for i in 0..groups.len() {
        // Independent double loop: mean cosine over relation pairs, then mean
        // over the other tasks.
        let mut total = 0.0;
        for j in (0..groups.len()).filter(|&j| j != i) {
            let mut s = 0.0;
            for a in &groups[i] {
                for b in &groups[j] {
                    let (va, vb) = (table.get(a)?, table.get(b)?);
                    let d: f64 = va.iter().zip(vb).map(|(x, y)| x * y).sum();
                    let na = va.iter().map(|x| x * x).sum::<f64>().sqrt();
                    let nb = vb.iter().map(|x| x * x).sum::<f64>().sqrt();
                    s += d / (na * nb);
                }
            }
            total += s / (groups[i].len() * groups[j].len()) as f64;
        }
        let oracle = total / (groups.len() - 1) as f64;
        let got = cml_core::curriculum::task_difficulty(i, &groups, &table)?;
        worst = worst.max((got - oracle).abs());
        let sim = task_similarity(&groups[i], &groups[(i + 1) % groups.len()], &table)?;
        worst = worst.max((sim - task_similarity(&groups[(i + 1) % groups.len()], &groups[i], &table)?).abs());
    }
    let fr = forgetting_rate(&[0.5, 0.6])?;
    let a = 3f64.sqrt() / 2.0;
    let eb = error_bound(&[-a, -a, a, a], 0.95)?;
    let acc = average_accuracy(&[1.0, 0.5])?;
    let pass = worst < 1e-12
        && (fr - 0.2).abs() < 1e-12
        && (eb - 1.959963984540054 / 2.0).abs() < 1e-12
        && (eb - 0.979982).abs() < 5e-7
        && (acc - 0.75).abs() < 1e-12;
    outcome(pass, format!("difficulty err {worst:.1e}, Fr {fr:.12}, EB {eb:.12}, Acc_a {acc}"))
}

fn c3_permutations() -> Result<Outcome> {
    let synth = SynthConfig { tasks: 3, relations_per_task: 3, train_per_relation: 20, test_per_relation: 8, ..SynthConfig::default() };
    let out = generate_synthetic(&synth, &mut Rng::new(11, 0))?;
    let cfg = TrainConfig {
        strategy: Strategy::Replay,
        memory_per_task: 12,
        model: ModelConfig { embedding_dim: 32, hidden_dim: 32, output_dim: 16, ..ModelConfig::default() },
        ..TrainConfig::default()
    };
    let init = ExtractorModel::new(&out.benchmark, &cfg.model, &mut Rng::new(12, 0))?;
    let ctx = StudyContext { benchmark: &out.benchmark, config: &cfg, embeddings: None, init: &init, base_seed: 13, workers: 1 };
    let study = run_permutation_study(&ctx, StudyMode::Exhaustive, &[0, 1, 2], 0)?;

    // Oracle: train every permutation separately (run id = lexicographic
    // rank) and average final accuracies by hand.
    let mut oracle = [[(0.0, 0usize); 3]; 3];
    let mut rank = 0;
    for a in 0..3 {
        for b in (0..3).filter(|&b| b != a) {
            for c in (0..3).filter(|&c| c != a && c != b) {
                let order = RunOrder::new(vec![a, b, c])?;
                let mut rng = Rng::new(13, RUN_STREAM_BASE + rank);
                let (rec, _) = train_sequence(&out.benchmark, &order, &cfg, None, &init, rank as usize, &mut rng)?;
                for (pos, &t) in order.permutation.iter().enumerate() {
                    oracle[t][pos].0 += rec.final_acc[t];
                    oracle[t][pos].1 += 1;
                }
                rank += 1;
            }
        }
    }
    let mut exact = true;
    for (t, row) in oracle.iter().enumerate() {
        for (pos, &(sum, n)) in row.iter().enumerate() {
            exact &= n == 2 && position_avg_accuracy(&study.records, t, pos)? == sum / n as f64;
        }
    }
    exact &= study.records.len() == all_permutations(3).len();

    let cyclic = run_permutation_study(&ctx, StudyMode::Cyclic, &[0, 1, 2], 0)?;
    let once = (0..3).all(|t| (0..3).all(|p| cyclic.cell_count(t, p) == 1));
    outcome(exact && once, format!("exhaustive == oracle: {exact}; cyclic cells filled once: {once}"))
}

fn c4_directional(runs: &DefaultRuns) -> Result<Outcome> {
    let (mut cml, mut replay, mut vanilla) = (Vec::new(), Vec::new(), Vec::new());
    for seed in SEEDS {
        let c = load_report_of(&runs.cml_dir(seed))?;
        cml.push(c.runs[0].acc_a);
        let v = load_report_of(&runs.root.join(format!("vanilla-{seed}")))?;
        vanilla.push(v.runs[0].acc_a);
        let p = Pipeline::open(runs.with_data(seed, Strategy::Replay), runs.root.join(format!("replay-{seed}")))?;
        replay.push(p.train_single()?.acc_a);
    }
    let (c, r, v) = (mean(&cml)?, mean(&replay)?, mean(&vanilla)?);
    outcome(
        c >= r && r >= v && c - v >= 0.05,
        format!("mean acc_a cml {c:.4} >= replay {r:.4} >= vanilla {v:.4}, gap {:.1} points", 100.0 * (c - v)),
    )
}

fn load_report_of(dir: &Path) -> Result<cml_core::eval::MetricsReport> {
    cml_core::pipeline::load_report(dir)
}

fn c5_correlation(root: &Path) -> Result<Outcome> {
    let mut pccs = Vec::new();
    for seed in SEEDS {
        let mut c = config(seed, Strategy::Replay);
        // Tasks 0, 1 and 2 share concept distributions relation by relation.
        c.synth.clusters = (0..4).map(|j| RelationCluster { relations: vec![j, 4 + j, 8 + j], spread: 0 }).collect();
        let report = cmd_pipeline(&c, &root.join(format!("cluster-replay-{seed}")))?;
        pccs.push(report.pcc.unwrap_or(f64::NAN));
    }
    let m = mean(&pccs)?;
    outcome(m > 0.0, format!("replay pcc per seed {pccs:.3?}, mean {m:.4}"))
}

fn c6_error_bounds(runs: &DefaultRuns) -> Result<Outcome> {
    let (mut cml, mut vanilla) = (Vec::new(), Vec::new());
    for seed in SEEDS {
        let c = load_report_of(&runs.cml_dir(seed))?;
        let v = load_report_of(&runs.root.join(format!("vanilla-{seed}")))?;
        cml.push(c.acc_a.eb.unwrap_or(f64::NAN));
        vanilla.push(v.acc_a.eb.unwrap_or(f64::NAN));
        debug_assert_eq!(c.acc_a.values.len(), 5);
    }
    let (c, v) = (mean(&cml)?, mean(&vanilla)?);
    outcome(c < v, format!("mean EB(acc_a) cml {c:.4} < vanilla {v:.4}"))
}

fn c7_embeddings(runs: &DefaultRuns) -> Result<Outcome> {
    let mut rhos = Vec::new();
    let mut separated = true;
    let mut gaps = Vec::new();
    for seed in &SEEDS[..3] {
        let dir = runs.cml_dir(*seed);
        let truth = generate_synthetic(&SynthConfig::default(), &mut Rng::new(*seed, SYNTH_STREAM))?;
        let emb = load_relation_embeddings(&dir.join("embeddings.tsv"))?;
        let (mut g, mut s) = (Vec::new(), Vec::new());
        for i in 0..truth.relations.len() {
            for j in i + 1..truth.relations.len() {
                g.push(truth.ground_truth[i][j]);
                let (a, b) = (&emb[&truth.relations[i]], &emb[&truth.relations[j]]);
                s.push(cosine_similarity(a.emd.as_slice(), b.emd.as_slice())?);
            }
        }
        rhos.push(spearman(&g, &s)?);

        let kg = load_kg(&dir.join("data").join("kg"))?;
        let mut m = TransEModel::init(kg.num_entities(), kg.num_relations(), &TransEConfig::default(), &mut Rng::new(0, 0));
        load_checkpoint(&mut m, &dir.join("kg").join("transe"))?;
        let mut rng = Rng::new(*seed, 99);
        let (mut pos, mut neg) = (0.0, 0.0);
        for &t in &kg.triples {
            pos += m.score(t)?;
            neg += m.score(corrupt(t, kg.num_entities(), &mut rng))?;
        }
        let n = kg.triples.len() as f64;
        separated &= pos < neg;
        gaps.push((pos / n, neg / n));
    }
    let rho = mean(&rhos)?;
    outcome(
        rho > 0.7 && separated,
        format!("spearman per seed {rhos:.4?}, mean {rho:.4}; transe true/corrupted mean score {gaps:.3?}"),
    )
}

fn c8_determinism(runs: &DefaultRuns) -> Result<Outcome> {
    let seed = SEEDS[0];
    let again = runs.root.join(format!("cml-{seed}-again"));
    cmd_pipeline(&config(seed, Strategy::Cml), &again)?;
    let a = std::fs::read(runs.cml_dir(seed).join("metrics.json")).map_err(|e| cml_core::Error::io(runs.cml_dir(seed), e))?;
    let b = std::fs::read(again.join("metrics.json")).map_err(|e| cml_core::Error::io(&again, e))?;
    outcome(a == b, format!("metrics.json {} bytes, identical: {}", a.len(), a == b))
}

fn prepare_default_runs(root: &Path) -> Result<DefaultRuns> {
    let runs = DefaultRuns { root: root.to_path_buf() };
    for seed in SEEDS {
        cmd_pipeline(&config(seed, Strategy::Cml), &runs.cml_dir(seed))?;
        cmd_pipeline(&runs.with_data(seed, Strategy::Vanilla), &root.join(format!("vanilla-{seed}")))?;
    }
    Ok(runs)
}

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().expect("temp dir");
    let root = tmp.path().to_path_buf();
    let started = Instant::now();
    let shared = prepare_default_runs(&root);
    println!("default-benchmark runs ready in {:.1}s", started.elapsed().as_secs_f64());

    let criteria: Vec<(&str, Box<dyn Fn() -> Result<Outcome>>)> = vec![
        ("1 gradient correctness", Box::new(c1_gradients)),
        ("2 metric formula oracles", Box::new(c2_formulas)),
        ("3 permutation oracle equivalence", Box::new(c3_permutations)),
        ("4 cml >= replay >= vanilla", Box::new(|| c4_directional(shared.as_ref().map_err(clone_err)?))),
        ("5 difficulty-forgetting correlation", Box::new(|| c5_correlation(&root))),
        ("6 order-sensitivity reduction", Box::new(|| c6_error_bounds(shared.as_ref().map_err(clone_err)?))),
        ("7 embedding sanity", Box::new(|| c7_embeddings(shared.as_ref().map_err(clone_err)?))),
        ("8 determinism", Box::new(|| c8_determinism(shared.as_ref().map_err(clone_err)?))),
    ];
    let mut failed = 0;
    for (name, check) in &criteria {
        let t = Instant::now();
        let (pass, detail) = match check() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!pass);
        println!(
            "[{}] criterion {name}: {detail} ({:.1}s)",
            if pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn clone_err(e: &cml_core::Error) -> cml_core::Error {
    cml_core::Error::Precondition(format!("shared runs failed: {e}"))
}
