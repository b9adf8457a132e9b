//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion does.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use molstory::canon::{decompose, standardize_attachment, Attach, AttachmentRegistry, CanonicalFragment};
use molstory::engine::{
    accuracy, calibrate, generate, resample, story_samples, train, train_initializer, Axis, CalibrationConfig,
    GenerateOptions, IdentityPredictor, Kde, ModelBundle, SyntheticPredictor, TrainConfig,
};
use molstory::fragmenter::{bond_owners, generate_fragments, FragmentKind};
use molstory::geometry::{GeometryProvider, ProviderKind};
use molstory::io::{ingest_csv, DatasetRecord, Vocabulary};
use molstory::model::gradcheck::check_gradients;
use molstory::model::{
    geometry_attention, FragmentInitializer, Matrix, ModelConfig, ParamStore, StepInput, StoryModel, Tape, VocabDims,
};
use molstory::molgraph::{write_canonical_smiles, MolGraph};
use molstory::story::{replay_story, unroll_story, Story};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn corpus() -> Vec<DatasetRecord> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/corpus.csv");
    ingest_csv(&path).unwrap().records
}

fn vocab_of(records: &[DatasetRecord]) -> Vocabulary {
    Vocabulary::build(&records.iter().map(|r| r.mol.clone()).collect::<Vec<_>>()).unwrap()
}

fn round_trip(records: &[DatasetRecord]) -> Outcome {
    let start = Instant::now();
    let vocab = vocab_of(records);
    let large = records.iter().filter(|r| r.mol.heavy_atom_count() > 30).count();
    let mut failures = 0;
    for (i, r) in records.iter().enumerate() {
        let want = write_canonical_smiles(&r.mol).unwrap();
        for seed in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed * 7919 + i as u64);
            let ok = unroll_story(&r.mol, &vocab, &mut rng)
                .ok()
                .and_then(|s| Story::from_text(&s.to_text()).ok())
                .and_then(|s| replay_story(&s, &vocab).ok())
                .and_then(|m| write_canonical_smiles(&m).ok())
                .is_some_and(|got| got == want);
            failures += !ok as usize;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        records.len() >= 200 && large == 0 && failures == 0 && secs < 60.0,
        format!("{} molecules x 10 seeds, {failures} failures, {secs:.1}s", records.len()),
    )
}

/// Every label-preserving permutation of the fragment graph, by exhaustive
/// backtracking over atom assignments.
fn brute_force_automorphisms(g: &MolGraph) -> Vec<Vec<usize>> {
    fn label(g: &MolGraph, i: usize) -> (u8, i8, bool, u8) {
        let a = g.atom(i);
        (a.element.atomic_number(), a.formal_charge, a.is_aromatic, a.implicit_h)
    }
    fn extend(g: &MolGraph, perm: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        let i = perm.len();
        if i == g.atom_count() {
            out.push(perm.clone());
            return;
        }
        for j in 0..g.atom_count() {
            if used[j] || label(g, i) != label(g, j) || g.degree(i) != g.degree(j) {
                continue;
            }
            let consistent = (0..i).all(|k| {
                let a = g.bond_between(k, i).map(|b| g.bond(b).code());
                let b = g.bond_between(perm[k], j).map(|b| g.bond(b).code());
                a == b
            });
            if consistent {
                used[j] = true;
                perm.push(j);
                extend(g, perm, used, out);
                perm.pop();
                used[j] = false;
            }
        }
    }
    let mut out = Vec::new();
    extend(g, &mut Vec::new(), &mut vec![false; g.atom_count()], &mut out);
    out
}

fn standardization_oracle(vocab: &Vocabulary) -> Outcome {
    let mut checked = 0;
    let mut bad = Vec::new();
    for f in vocab.fragments().iter().filter(|f| f.cf.size() <= 8) {
        let cf = &f.cf;
        let autos = brute_force_automorphisms(&cf.graph);
        let n = cf.size();
        let orbit_min: Vec<usize> = (0..n).map(|i| autos.iter().map(|p| p[i]).min().unwrap()).collect();
        let same_group: BTreeSet<&Vec<usize>> = cf.automorphisms.iter().collect();
        let oracle_group: BTreeSet<&Vec<usize>> = autos.iter().collect();
        if orbit_min != cf.std_map || same_group != oracle_group {
            bad.push(cf.smiles.clone());
        }
        checked += 1;
    }
    outcome(
        checked > 0 && bad.is_empty(),
        format!("{checked} fragments with <= 8 atoms, disagreements {bad:?}"),
    )
}

fn worked_example() -> Outcome {
    let cf = CanonicalFragment::from_smiles("c1cnccn1").unwrap();
    let img = |k: usize| cf.automorphisms.iter().map(|p| p[k]).collect::<Vec<_>>();
    let mut reg = AttachmentRegistry::new();
    let reps: BTreeSet<Attach> = [(3, 4), (4, 3), (1, 0), (0, 1)]
        .into_iter()
        .map(|(a, b)| standardize_attachment(Attach::Two(a, b), &cf, &mut reg))
        .collect();
    let keys: BTreeSet<Attach> = [(3, 4), (4, 3), (1, 0), (0, 1)]
        .into_iter()
        .map(|(a, b)| cf.orbit_key(Attach::Two(a, b)))
        .collect();
    let pass = cf.automorphisms.len() == 4
        && img(0) == [0, 3, 4, 1]
        && img(2) == [2, 5, 2, 5]
        && cf.std_map[0] == 0
        && cf.std_map[2] == 2
        && reps.len() == 1
        && keys == BTreeSet::from([Attach::Two(0, 0)]);
    outcome(
        pass,
        format!(
            "{} maps, images of 0 {:?}, images of 2 {:?}, {} representative(s), elementwise key {:?}",
            cf.automorphisms.len(),
            img(0),
            img(2),
            reps.len(),
            keys
        ),
    )
}

fn edge_partition(records: &[DatasetRecord]) -> Outcome {
    let mut violations = 0;
    let mut bonds = 0;
    for r in records {
        let m = &r.mol;
        let frags = generate_fragments(m);
        let owners = bond_owners(m, &frags);
        let mut cover: Vec<Vec<usize>> = vec![Vec::new(); m.bond_count()];
        for (k, f) in frags.iter().enumerate() {
            for b in f.bonds(m) {
                cover[b].push(k);
            }
        }
        let mut owned = vec![0usize; frags.len()];
        for (b, c) in cover.iter().enumerate() {
            bonds += 1;
            let rings = c.iter().filter(|&&k| frags[k].kind == FragmentKind::Ring).count();
            let ok = match owners[b] {
                Some(o) => {
                    owned[o] += 1;
                    c.contains(&o) && !c.is_empty() && (c.len() == 1 || rings == c.len())
                }
                None => false,
            };
            violations += !ok as usize;
        }
        // a bond fragment owns exactly its own bond
        for (k, f) in frags.iter().enumerate() {
            if f.kind == FragmentKind::Bond && owned[k] != 1 {
                violations += 1;
            }
        }
        if owned.iter().sum::<usize>() != m.bond_count() {
            violations += 1;
        }
    }
    outcome(violations == 0, format!("{} molecules, {bonds} bonds, {violations} violations", records.len()))
}

fn toy_samples() -> (Vocabulary, Vec<(StepInput, usize)>) {
    let mol = molstory::molgraph::parse_smiles("CC1Cc2nccnc2C1").unwrap();
    let vocab = Vocabulary::build(std::slice::from_ref(&mol)).unwrap();
    let story = unroll_story(&mol, &vocab, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    let samples = story_samples(&story, &vocab, &GeometryProvider::default(), [0.4, -1.1, 0.7]).unwrap();
    (vocab, samples)
}

fn gradient_suite() -> Outcome {
    let start = Instant::now();
    let tol = 1e-4;
    let mut worst: BTreeMap<&str, f64> = BTreeMap::new();
    let mut note = |name: &'static str, checks: Vec<molstory::model::gradcheck::TensorCheck>| {
        let w = checks.iter().map(|c| c.max_rel_error).fold(0.0, f64::max);
        worst.insert(name, w);
    };

    // attention with a distance bias
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut rand_matrix = |r: usize, c: usize| Matrix::from_vec(r, c, (0..r * c).map(|_| rng.gen_range(-1.0..1.0)).collect());
    let mut s = ParamStore::new();
    for name in ["q", "k", "v"] {
        s.add(name, rand_matrix(3, 4));
    }
    s.add("a", Matrix::scalar(0.7));
    let weights = rand_matrix(3, 4);
    let dist = Matrix::from_vec(3, 3, vec![0.0, 1.2, 2.3, 1.2, 0.0, 1.4, 2.3, 1.4, 0.0]);
    let attention_loss = |store: &ParamStore| {
        let mut t = Tape::new(store);
        let (q, k, v, a) = (t.param(0), t.param(1), t.param(2), t.param(3));
        let out = geometry_attention(&mut t, q, k, v, Some(&dist), a);
        let w = t.input(weights.clone());
        let parts: Vec<_> = (0..3)
            .map(|i| {
                let (o, wi) = (t.row(out, i), t.row(w, i));
                t.matmul_t(o, wi)
            })
            .collect();
        let l = t.sum(&parts);
        (t.value(l).data[0], t.backward(l))
    };
    let (_, g) = attention_loss(&s);
    note("geometry_attention", check_gradients(&s, &g, |st| attention_loss(st).0, 1e-5, 1));

    let (vocab, samples) = toy_samples();
    let samples: Vec<_> = samples.into_iter().filter(|(x, _)| x.fragments.len() <= 3).collect();
    let cfg = ModelConfig {
        frag_dim: 8,
        attach_dim: 4,
        heads: 2,
        layers: 2,
        hidden: 12,
        dropout: 0.0,
        ..ModelConfig::default()
    };
    let dims = molstory::engine::vocab_dims(&vocab);
    let model = StoryModel::new(cfg, dims, 3);

    // one forward step, reduced by a fixed random projection
    let x = samples.last().unwrap().0.clone();
    let proj = rand_matrix(1, dims.outputs);
    let forward_loss = |store: &ParamStore| {
        let m = StoryModel::from_store(cfg, dims, store.clone()).unwrap();
        let mut t = Tape::new(&m.store);
        let z = m.forward(&mut t, &x, None);
        let p = t.input(proj.clone());
        let l = t.matmul_t(z, p);
        (t.value(l).data[0], t.backward(l))
    };
    let (_, g) = forward_loss(&model.store);
    note("forward_step", check_gradients(&model.store, &g, |st| forward_loss(st).0, 1e-5, 1));

    let (_, g) = model.loss_and_grads(&samples, None);
    let story_loss = |st: &ParamStore| StoryModel::from_store(cfg, dims, st.clone()).unwrap().loss_and_grads(&samples, None).0;
    note("story_loss", check_gradients(&model.store, &g, story_loss, 1e-5, 1));

    let init = FragmentInitializer::new(6, vocab.fragment_count(), 4);
    let conds = rand_matrix(4, 3);
    let mut targets = Matrix::zeros(4, vocab.fragment_count());
    for r in 0..4 {
        targets.set(r, r % vocab.fragment_count(), 1.0);
    }
    let (_, g) = init.loss_and_grads(&conds, &targets);
    let init_loss = |st: &ParamStore| FragmentInitializer::from_store(st.clone()).unwrap().loss_and_grads(&conds, &targets).0;
    note("initializer_loss", check_gradients(&init.store, &g, init_loss, 1e-5, 1));

    let secs = start.elapsed().as_secs_f64();
    let pass = worst.len() == 4 && worst.values().all(|&w| w < tol) && secs < 30.0;
    let parts: Vec<String> = worst.iter().map(|(k, v)| format!("{k} {v:.1e}")).collect();
    outcome(pass, format!("max rel. error: {}, {secs:.1}s", parts.join(", ")))
}

/// First molecule of each distinct condition vector. Positional isomers get
/// identical synthetic properties, and a prompt cannot tell them apart.
fn distinct_prompts(records: &[DatasetRecord], n: usize) -> Vec<DatasetRecord> {
    let mut seen = HashSet::new();
    records
        .iter()
        .filter(|r| seen.insert(r.conditions().map(f64::to_bits)))
        .take(n)
        .cloned()
        .collect()
}

fn memorization(records: &[DatasetRecord]) -> Outcome {
    let set = distinct_prompts(records, 20);
    let vocab = vocab_of(&set);
    let cfg = TrainConfig {
        epochs: 100_000,
        learning_rate: 2e-3,
        lr_decay_steps: 2000,
        max_steps: 2000,
        batch_size: 32,
        dropout: 0.0,
        frag_dim: 64,
        attach_dim: 16,
        heads: 4,
        layers: 3,
        hidden: 128,
        seed: 7,
        eval_every: 0,
        ..TrainConfig::default()
    };
    let trained = train(&set, &[], &vocab, &cfg, |_| true);
    let steps = trained.metrics.last().unwrap().optimizer_steps;
    // ten fresh story draws per molecule, none of them seen in training
    let (mut hits, mut total) = (0.0, 0.0);
    for s in 0..10 {
        let (samples, _) = resample(&set, &vocab, &cfg, &trained.standardizer, 1_000_000 + s);
        hits += accuracy(&trained.model, &samples) * samples.len() as f64;
        total += samples.len() as f64;
    }
    let acc = hits / total;
    outcome(
        acc >= 0.95 && steps <= 2000,
        format!("{} molecules, {steps} optimizer steps, accuracy {acc:.4} over {total} resampled steps", set.len()),
    )
}

struct Generator {
    records: Vec<DatasetRecord>,
    vocab: Vocabulary,
    bundle: ModelBundle,
    init: FragmentInitializer,
    opts: GenerateOptions,
}

fn train_generator(records: &[DatasetRecord]) -> Generator {
    let vocab = vocab_of(records);
    let cfg = TrainConfig {
        epochs: 12,
        learning_rate: 2e-3,
        batch_size: 32,
        dropout: 0.1,
        frag_dim: 32,
        attach_dim: 8,
        heads: 4,
        layers: 2,
        hidden: 64,
        seed: 11,
        eval_every: 0,
        ..TrainConfig::default()
    };
    let trained = train(records, &[], &vocab, &cfg, |_| true);
    let (init, _) = train_initializer(records, &vocab, &trained.standardizer, &cfg);
    Generator {
        records: records.to_vec(),
        vocab,
        bundle: ModelBundle {
            model: trained.model,
            standardizer: trained.standardizer,
            provider: cfg.provider,
        },
        init,
        opts: GenerateOptions {
            top_k: cfg.top_k,
            max_fragments: cfg.max_fragments,
        },
    }
}

impl Generator {
    fn one(&self, prompt: [f64; 3], rng: &mut ChaCha8Rng) -> Result<(MolGraph, Story), molstory::story::StoryError> {
        let provider = GeometryProvider::new(self.bundle.provider);
        let b = &self.bundle;
        generate(prompt, &b.model, &self.init, &b.standardizer, &self.vocab, &provider, &self.opts, rng)
    }
}

fn validity(g: &Generator) -> Outcome {
    let lo: Vec<f64> = (0..3).map(|k| g.records.iter().map(|r| r.conditions()[k]).fold(f64::INFINITY, f64::min)).collect();
    let hi: Vec<f64> = (0..3).map(|k| g.records.iter().map(|r| r.conditions()[k]).fold(f64::NEG_INFINITY, f64::max)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut errors, mut valence, mut external, mut unreadable) = (0, 0, 0, 0);
    for _ in 0..1000 {
        let prompt = [0, 1, 2].map(|k| rng.gen_range(lo[k]..=hi[k]));
        match g.one(prompt, &mut rng) {
            Ok((m, story)) => {
                valence += m.validate_valences().is_err() as usize;
                let reread = molstory::molgraph::parse_smiles(&story.final_smiles).ok().and_then(|r| write_canonical_smiles(&r).ok());
                unreadable += (reread.as_deref() != Some(story.final_smiles.as_str())) as usize;
                let placed = story.steps.iter().filter_map(|s| match s {
                    molstory::story::StoryStep::Start { fragment } | molstory::story::StoryStep::Dock { fragment, .. } => {
                        Some(fragment)
                    }
                    _ => None,
                });
                external += placed.filter(|f| g.vocab.fragment_index(f).is_none()).count();
                // the decomposition of the finished molecule must also stay in vocabulary
                let d = decompose(&m).unwrap();
                external += d.placed.iter().filter(|p| g.vocab.fragment_index(&p.canonical.smiles).is_none()).count();
            }
            Err(_) => errors += 1,
        }
    }
    outcome(
        errors == 0 && valence == 0 && external == 0 && unreadable == 0,
        format!(
            "1000 molecules, {errors} generation errors, {valence} valence violations, {external} vocabulary-external fragments, {unreadable} SMILES that do not read back"
        ),
    )
}

fn calibration(g: &Generator) -> Outcome {
    let cfg = CalibrationConfig {
        seed: 5,
        ..CalibrationConfig::default()
    };
    let gen = |c: [f64; 3], rng: &mut ChaCha8Rng| g.one(c, rng);
    let report = calibrate(&g.records, Axis::LogS, gen, &SyntheticPredictor, &cfg).unwrap();
    let r = report.pearson();
    let ident = calibrate(&g.records, Axis::LogS, gen, &IdentityPredictor, &cfg).unwrap();
    let diagonal = ident
        .rows
        .iter()
        .all(|row| row.unique == 0 || (row.mean == row.prompt && row.std == 0.0));
    let filled = ident.rows.iter().filter(|row| row.unique > 0).count();
    outcome(
        report.rows.len() == 30 && r >= 0.8 && diagonal && filled == 30,
        format!(
            "pearson {r:.3} over {} prompts, identity diagonal exact: {diagonal} ({filled}/30 prompts), novelty {:.3}",
            report.rows.len(),
            report.novelty_ratio
        ),
    )
}

fn kde_unit() -> Outcome {
    let kde = Kde::fit(&[[1.3, -0.4, 2.2]], 0.14).unwrap();
    let expected = (2.0 * std::f64::consts::PI).powf(-1.5) * 0.14f64.powi(-3);
    let raw = kde.score([1.3, -0.4, 2.2]);
    let z = kde.score_standardized([0.0, 0.0, 0.0]);
    let rel = ((raw - expected) / expected).abs().max(((z - expected) / expected).abs());
    outcome(rel < 1e-9, format!("self-density {raw:.10e}, closed form {expected:.10e}, rel. error {rel:.1e}"))
}

fn geometry_ablation() -> Outcome {
    let (vocab, _) = toy_samples();
    let mol = molstory::molgraph::parse_smiles("CC1Cc2nccnc2C1").unwrap();
    let story = unroll_story(&mol, &vocab, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
    let provider = GeometryProvider::new(ProviderKind::None);
    let samples = story_samples(&story, &vocab, &provider, [0.1, 0.2, -0.3]).unwrap();
    let cfg = ModelConfig {
        frag_dim: 16,
        attach_dim: 8,
        heads: 4,
        layers: 3,
        hidden: 32,
        dropout: 0.0,
        geometry_init: 0.0,
        freeze_geometry: true,
        ..ModelConfig::default()
    };
    let dims: VocabDims = molstory::engine::vocab_dims(&vocab);
    let mut model = StoryModel::new(cfg, dims, 12);
    // a training step must leave the frozen scale at zero
    let (_, grads) = model.loss_and_grads(&samples, None);
    let mut adam = molstory::model::AdamState::new(&model.store);
    molstory::model::adam_step(&mut model.store, &grads, &mut adam, &molstory::model::AdamConfig { lr: 1e-2, ..Default::default() });
    let free = model.without_geometry();
    let mut worst: f64 = 0.0;
    for (x, _) in &samples {
        for (a, b) in model.logits(x).iter().zip(free.logits(x)) {
            worst = worst.max((a - b).abs());
        }
    }
    let scale = model.geometry_scale();
    outcome(
        worst <= 1e-10 && scale == 0.0,
        format!("{} steps, max |logit difference| {worst:.1e}, geometry scale after update {scale}", samples.len()),
    )
}

fn pipeline(records: &[DatasetRecord]) -> (Vec<u8>, Vec<String>) {
    let text: String = std::iter::once("smiles,logS,redox,sascore".to_string())
        .chain(records.iter().map(|r| {
            let c = r.conditions();
            format!("{},{},{},{}", write_canonical_smiles(&r.mol).unwrap(), c[0], c[1], c[2])
        }))
        .collect::<Vec<_>>()
        .join("\n");
    let data = molstory::io::ingest_reader(text.as_bytes()).unwrap().records;
    let vocab = vocab_of(&data);
    let cfg = TrainConfig {
        epochs: 5,
        learning_rate: 1e-3,
        batch_size: 16,
        dropout: 0.3,
        frag_dim: 32,
        attach_dim: 8,
        heads: 4,
        layers: 2,
        hidden: 64,
        init_steps: 200,
        seed: 3,
        ..TrainConfig::default()
    };
    let trained = train(&data, &[], &vocab, &cfg, |_| true);
    let (init, _) = train_initializer(&data, &vocab, &trained.standardizer, &cfg);
    let bundle = ModelBundle {
        model: trained.model,
        standardizer: trained.standardizer,
        provider: cfg.provider,
    };
    let mut bytes = Vec::new();
    bundle.to_store(&vocab).write_to(&mut bytes).unwrap();
    init.store.write_to(&mut bytes).unwrap();
    let opts = GenerateOptions {
        top_k: cfg.top_k,
        max_fragments: cfg.max_fragments,
    };
    let provider = cfg.geometry();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let stories = (0..10)
        .map(|i| {
            let prompt = data[i].conditions();
            let (_, s) = generate(prompt, &bundle.model, &init, &bundle.standardizer, &vocab, &provider, &opts, &mut rng).unwrap();
            s.to_text()
        })
        .collect();
    (bytes, stories)
}

fn determinism(records: &[DatasetRecord]) -> Outcome {
    let start = Instant::now();
    let toy = &records[..40];
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let a = pool.install(|| pipeline(toy));
    let b = pool.install(|| pipeline(toy));
    let secs = start.elapsed().as_secs_f64();
    outcome(
        a == b && secs < 300.0,
        format!("weights {} bytes, 10 stories, identical: {}, {secs:.1}s for two runs", a.0.len(), a == b),
    )
}

#[test]
fn acceptance() {
    let records = corpus();
    let vocab = vocab_of(&records);
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut run = |id: u32, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let o = f();
        println!("{} criterion {id:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((id, name, o));
    };
    run(1, "decomposition round-trip", &mut || round_trip(&records));
    run(2, "standardization oracle", &mut || standardization_oracle(&vocab));
    run(3, "pyrazine worked example", &mut worked_example);
    run(4, "edge partition", &mut || edge_partition(&records));
    run(5, "gradient suite", &mut gradient_suite);
    run(6, "memorization capacity", &mut || memorization(&records));
    let generator = train_generator(&records);
    run(7, "validity by construction", &mut || validity(&generator));
    run(8, "calibration harness", &mut || calibration(&generator));
    run(9, "KDE unit check", &mut kde_unit);
    run(10, "geometry ablation switch", &mut geometry_ablation);
    run(11, "determinism", &mut || determinism(&records));
    let failed: Vec<u32> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
