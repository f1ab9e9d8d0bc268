// SPDX-License-Identifier: MIT OR Apache-2.0

//! Independent oracles and the checks behind the acceptance report. Each
//! check returns a short summary on success and the first discrepancy on
//! failure.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use fluidrep::backend::Backend;
use fluidrep::blocksworld::{
    apply, bfs_solve, enumerate_states, generate_puzzle, is_applicable, prompt_example_plan, verify_plan, Action,
    Puzzle, State,
};
use fluidrep::cli::{run_manifest, ExperimentManifest, PuzzleSource, Variant};
use fluidrep::obfuscation::{builtin_naming, parse_plan, render_example, Concept, ConceptClass, Naming, Template};
use fluidrep::replab::{center_table, cross_naming_table, extract, pca_project, ConceptTable, ExtractionSpec};
use fluidrep::stats::{one_sample_t, t_cdf, DeltaSample, TestResult};
use fluidrep::steering::{steer_update, ConceptHook, Intervention, LayerTables, VectorKind};
use fluidrep::toy::{ToyConfig, ToyModel};
use fluidrep::trace::{ActivationDump, DumpManifest, LayerMatrix};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<String, String>;

pub const STANDARD_GOLDEN: &str = include_str!("../golden/standard_example.txt");
pub const MYSTERY_GOLDEN: &str = include_str!("../golden/mystery_example.txt");

pub fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

// ---------------------------------------------------------------- domain

/// A state as "what each block rests on" plus the held block. `None` in
/// `on` means the table, or nothing for the held block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Flat {
    pub on: Vec<Option<usize>>,
    pub held: Option<usize>,
}

impl Flat {
    pub fn of(state: &State) -> Self {
        let mut on = vec![None; state.block_count()];
        for tower in state.stacks() {
            for pair in tower.windows(2) {
                on[pair[1].index()] = Some(pair[0].index());
            }
        }
        Flat {
            on,
            held: state.holding().map(|b| b.index()),
        }
    }

    fn clear(&self, x: usize) -> bool {
        self.held != Some(x) && !self.on.contains(&Some(x))
    }

    fn on_table(&self, x: usize) -> bool {
        self.held != Some(x) && self.on[x].is_none()
    }

    /// The successor under the written rules, or `None` when a
    /// precondition fails.
    pub fn step(&self, action: Action) -> Option<Flat> {
        let n = self.on.len();
        let mut next = self.clone();
        match action {
            Action::PickUp(x) => {
                let x = x.index();
                if x >= n || self.held.is_some() || !self.on_table(x) || !self.clear(x) {
                    return None;
                }
                next.held = Some(x);
            }
            Action::PutDown(x) => {
                let x = x.index();
                if x >= n || self.held != Some(x) {
                    return None;
                }
                next.held = None;
                next.on[x] = None;
            }
            Action::Unstack(x, y) => {
                let (x, y) = (x.index(), y.index());
                if x >= n || y >= n || x == y || self.held.is_some() || self.on[x] != Some(y) || !self.clear(x) {
                    return None;
                }
                next.held = Some(x);
                next.on[x] = None;
            }
            Action::Stack(x, y) => {
                let (x, y) = (x.index(), y.index());
                if x >= n || y >= n || x == y || self.held != Some(x) || !self.clear(y) {
                    return None;
                }
                next.held = None;
                next.on[x] = Some(y);
            }
        }
        Some(next)
    }
}

pub fn verifier_oracle() -> Check {
    let started = Instant::now();
    let states = enumerate_states(4).map_err(|e| e.to_string())?;
    let actions = Action::all(4);
    let mut applicable = 0usize;
    for s in states {
        let flat = Flat::of(s);
        for &a in &actions {
            let expected = flat.step(a);
            if is_applicable(s, a) != expected.is_some() {
                return Err(format!("{a:?} in {s:?}: applicability disagrees with the rule oracle"));
            }
            match (apply(s, a), expected) {
                (Ok(next), Some(want)) => {
                    if Flat::of(&next) != want {
                        return Err(format!(
                            "{a:?} in {s:?}: successor {next:?} disagrees with the rule oracle"
                        ));
                    }
                    applicable += 1;
                }
                (Err(_), None) => {}
                (got, want) => return Err(format!("{a:?} in {s:?}: apply gave {got:?}, oracle {want:?}")),
            }
        }
    }
    for seed in 0..100 {
        let p = generate_puzzle(4, seed).map_err(|e| e.to_string())?;
        let plan = bfs_solve(&p).map_err(|e| format!("seed {seed}: {e}"))?;
        if !verify_plan(&p, &plan).is_valid() {
            return Err(format!("seed {seed}: BFS plan does not verify"));
        }
    }
    let took = started.elapsed();
    if took > Duration::from_secs(60) {
        return Err(format!("took {took:?}"));
    }
    Ok(format!(
        "{} states x {} actions, {applicable} applicable; 100 BFS plans valid",
        states.len(),
        actions.len()
    ))
}

// ---------------------------------------------------------------- prompts

/// The lines between `[PLAN]` and `[PLAN END]`.
pub fn plan_block(text: &str) -> Vec<&str> {
    text.lines()
        .skip_while(|l| l.trim() != "[PLAN]")
        .skip(1)
        .take_while(|l| l.trim() != "[PLAN END]")
        .collect()
}

pub fn golden_round_trip() -> Check {
    let puzzle = Puzzle::prompt_example();
    let plan = prompt_example_plan();
    let identity = Naming::identity();
    let mystery1 = builtin_naming(1).map_err(|e| e.to_string())?;
    let mystery = Template::MYSTERY.with_relational(fluidrep::obfuscation::RelationalSlots::Swapped);

    let standard = render_example(&puzzle, &plan, &identity, Template::STANDARD);
    if plan_block(&standard) != plan_block(STANDARD_GOLDEN) {
        return Err(format!("standard plan lines differ:\n{:?}", plan_block(&standard)));
    }
    let obfuscated = render_example(&puzzle, &plan, &mystery1, mystery);
    if plan_block(&obfuscated) != plan_block(MYSTERY_GOLDEN) {
        return Err(format!("mystery plan lines differ:\n{:?}", plan_block(&obfuscated)));
    }
    let parsed = parse_plan(MYSTERY_GOLDEN, &mystery1).map_err(|e| e.to_string())?;
    if parsed != plan {
        return Err(format!("parsed mystery plan {parsed:?}"));
    }
    let parsed = parse_plan(STANDARD_GOLDEN, &identity).map_err(|e| e.to_string())?;
    if parsed != plan {
        return Err(format!("parsed standard plan {parsed:?}"));
    }
    Ok(format!(
        "{} plan lines under both namings; both plans parse back",
        plan.len()
    ))
}

// ---------------------------------------------------------------- extraction

/// Filler tokens that never match a naming-1 word.
pub const FILLER: [&str; 4] = [" Block", " A", ",", "."];

/// Token `k`: concepts first (in `Concept::ALL` order), then filler.
pub fn token_text(naming: &Naming, k: usize) -> String {
    if k < Concept::ALL.len() {
        format!(" {}", naming.word(Concept::ALL[k]))
    } else {
        FILLER[k - Concept::ALL.len()].to_owned()
    }
}

/// A dump whose tokens are drawn from concept words and filler.
pub fn planted_dump(naming: &Naming, kinds: &[usize], d: usize, layer: usize, values: &[f32]) -> ActivationDump {
    let n = kinds.len();
    let tokens: Vec<String> = kinds.iter().map(|&k| token_text(naming, k)).collect();
    let manifest = DumpManifest {
        model_name: "planted".into(),
        num_layers: layer,
        hidden_dim: d,
        capture_point: String::new(),
        token_ids: kinds.iter().map(|&k| k as u32).collect(),
        tokens,
    };
    let m = LayerMatrix::new(n, d, values[..n * d].to_vec()).unwrap();
    ActivationDump::new(manifest, BTreeMap::from([(layer, m)])).unwrap()
}

/// Mean over occurrences (pooled over dumps) of the mean hidden state over
/// the occurrence token and the one before it, for occurrences entirely in
/// `[t - w, t)`.
pub fn brute_force_rep(
    dumps: &[(Vec<usize>, Vec<f32>)],
    d: usize,
    concept: usize,
    t: usize,
    w: usize,
) -> Option<Vec<f64>> {
    let lo = t - w;
    let mut sum = vec![0.0f64; d];
    let mut count = 0usize;
    for (kinds, values) in dumps {
        for (i, &k) in kinds.iter().enumerate() {
            if k != concept {
                continue;
            }
            let first = i.saturating_sub(1);
            if first < lo || i >= t {
                continue;
            }
            let span: Vec<usize> = (first..=i).collect();
            for j in 0..d {
                let m: f64 = span.iter().map(|&p| f64::from(values[p * d + j])).sum::<f64>() / span.len() as f64;
                sum[j] += m;
            }
            count += 1;
        }
    }
    (count > 0).then(|| sum.into_iter().map(|s| s / count as f64).collect())
}

fn rel_close(a: &[f64], b: &[f64], tol: f64) -> bool {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-300);
    a.len() == b.len() && diff <= tol * scale
}

type Traces = Vec<(Vec<usize>, Vec<f32>)>;

fn traces_strategy() -> impl Strategy<Value = (usize, Traces, usize, usize)> {
    let kinds = Concept::ALL.len() + FILLER.len();
    (1usize..6).prop_flat_map(move |d| {
        let trace = (2usize..40).prop_flat_map(move |n| {
            (
                prop::collection::vec(0..kinds, n),
                prop::collection::vec(-10.0f32..10.0, n * d),
            )
        });
        (Just(d), prop::collection::vec(trace, 1..5), 1usize..50, 1usize..50)
            .prop_map(|(d, traces, t, w)| (d, traces, t.max(w), w))
    })
}

pub fn extraction_oracle(cases: u32) -> Check {
    let naming = builtin_naming(1).map_err(|e| e.to_string())?;
    let found = std::cell::Cell::new(0usize);
    let absent = std::cell::Cell::new(0usize);
    runner(cases)
        .run(&traces_strategy(), |(d, traces, t, w)| {
            let dumps: Vec<ActivationDump> = traces.iter().map(|(k, v)| planted_dump(&naming, k, d, 3, v)).collect();
            let spec = ExtractionSpec {
                naming: &naming,
                layer: 3,
                timestamp: t,
                window: w,
                batch: dumps.iter().collect(),
            };
            for (ci, &concept) in Concept::ALL.iter().enumerate() {
                let want = brute_force_rep(&traces, d, ci, t, w);
                match (extract(&spec, concept), want) {
                    (Ok(rep), Some(want)) => {
                        prop_assert!(
                            rel_close(&rep.vector, &want, 1e-6),
                            "{concept}: {:?} vs {want:?}",
                            rep.vector
                        );
                        found.set(found.get() + 1);
                    }
                    (Err(_), None) => absent.set(absent.get() + 1),
                    (got, want) => prop_assert!(false, "{concept}: got {got:?}, oracle {want:?}"),
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!(
        "{cases} cases, {} representations matched, {} agreed absent",
        found.get(),
        absent.get()
    ))
}

fn class_table_strategy(min_d: usize) -> impl Strategy<Value = ConceptTable> {
    (min_d..8).prop_flat_map(|d| {
        prop::collection::vec(prop::collection::vec(-1e3f64..1e3, d), Concept::ALL.len())
            .prop_map(|vs| Concept::ALL.iter().copied().zip(vs).collect())
    })
}

pub fn centering_sums_to_zero(cases: u32) -> Check {
    runner(cases)
        .run(&class_table_strategy(1), |table| {
            let centered = center_table(&table).unwrap();
            for class in [ConceptClass::Actions, ConceptClass::Predicates] {
                let d = table[&Concept::PickUp].len();
                for j in 0..d {
                    let sum: f64 = class.members().iter().map(|c| centered[c][j]).sum();
                    let scale: f64 = class.members().iter().map(|c| table[c][j].abs()).sum::<f64>().max(1.0);
                    prop_assert!(sum.abs() <= 1e-12 * scale, "{class} component {j} sums to {sum}");
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!("{cases} cases"))
}

pub fn cross_naming_permutation_invariant(cases: u32) -> Check {
    let strategy = (2usize..6).prop_flat_map(|k| {
        (
            prop::collection::vec(class_table_strategy(3).prop_map(|t| t), k),
            Just((0..k).collect::<Vec<usize>>()).prop_shuffle(),
        )
    });
    runner(cases)
        .run(&strategy, |(tables, perm)| {
            let d = tables.iter().map(|t| t[&Concept::PickUp].len()).min().unwrap();
            let tables: Vec<ConceptTable> = tables
                .into_iter()
                .map(|t| t.into_iter().map(|(c, v)| (c, v[..d].to_vec())).collect())
                .collect();
            let ids = [1u32, 2, 4, 5, 6, 7];
            let a: BTreeMap<u32, ConceptTable> = tables.iter().enumerate().map(|(i, t)| (ids[i], t.clone())).collect();
            let b: BTreeMap<u32, ConceptTable> = tables
                .iter()
                .enumerate()
                .map(|(i, t)| (ids[perm[i]], t.clone()))
                .collect();
            let (x, y) = (cross_naming_table(&a).unwrap(), cross_naming_table(&b).unwrap());
            for c in Concept::ALL {
                prop_assert!(rel_close(&x[&c], &y[&c], 1e-12), "{c}: {:?} vs {:?}", x[&c], y[&c]);
                // and the average is the plain mean
                let mean: Vec<f64> = (0..d)
                    .map(|j| tables.iter().map(|t| t[&c][j]).sum::<f64>() / tables.len() as f64)
                    .collect();
                prop_assert!(rel_close(&x[&c], &mean, 1e-12));
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!("{cases} cases"))
}

pub fn replab_oracles() -> Check {
    let a = extraction_oracle(1000)?;
    let b = centering_sums_to_zero(1000)?;
    let c = cross_naming_permutation_invariant(1000)?;
    Ok(format!("extraction: {a}; centering: {b}; cross-naming: {c}"))
}

// ---------------------------------------------------------------- steering

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn norm_preservation() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    let mut skipped = 0usize;
    for _ in 0..10_000 {
        let d = rng.random_range(1..=64);
        let h: Vec<f64> = (0..d).map(|_| rng.random_range(-5.0..5.0)).collect();
        let v: Vec<f64> = (0..d).map(|_| rng.random_range(-5.0..5.0)).collect();
        let s: f64 = rng.random_range(0.0..=1.0);
        match steer_update(&h, &v, s) {
            Ok(out) => worst = worst.max((l2(&out) - l2(&h)).abs() / l2(&h)),
            Err(_) => skipped += 1,
        }
        if steer_update(&h, &v, 1.0).map_err(|e| e.to_string())? != h {
            return Err("s = 1 changed h".into());
        }
        let full = steer_update(&h, &v, 0.0).map_err(|e| e.to_string())?;
        let k = l2(&h) / l2(&v);
        let want: Vec<f64> = v.iter().map(|x| x * k).collect();
        if !rel_close(&full, &want, 1e-12) {
            return Err(format!("s = 0 gave {full:?}, want {want:?}"));
        }
    }
    if worst > 1e-6 {
        return Err(format!("worst relative norm error {worst:e}"));
    }
    Ok(format!(
        "10000 triples, worst relative norm error {worst:.1e}, {skipped} degenerate"
    ))
}

pub fn small_toy() -> ToyModel {
    ToyModel::new(ToyConfig {
        layers: 4,
        hidden_dim: 16,
        heads: 2,
        context_limit: 512,
        seed: 11,
    })
    .unwrap()
}

pub const LOCALITY_TEXT: &str = "As initial conditions I have that, province Block B, harmony, planet Block A. \
My plan is as follows: attack Block A, overcome Block A from Block B, feast Block C from Block A, \
succumb Block C, attack Block B, overcome Block B from Block C.";

/// A random table of every concept for `model`.
pub fn random_table(model: &ToyModel, seed: u64) -> ConceptTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Concept::ALL
        .iter()
        .map(|&c| {
            (
                c,
                (0..model.hidden_dim()).map(|_| rng.random_range(-3.0..3.0)).collect(),
            )
        })
        .collect()
}

pub fn intervention_locality() -> Check {
    let model = small_toy();
    let naming = builtin_naming(1).map_err(|e| e.to_string())?;
    let tokens = model.encode(LOCALITY_TEXT);
    let clean = model.forward(&tokens, None).map_err(|e| e.to_string())?;
    let d = model.hidden_dim();
    let window = 60..150;
    let mut checked = 0usize;
    for hook_layer in 1..=model.num_layers() {
        for intervention in [
            Intervention::Steer { scale: 0.5 },
            Intervention::Patch,
            Intervention::Subtract,
        ] {
            let tables: LayerTables = BTreeMap::from([(hook_layer, random_table(&model, hook_layer as u64))]);
            let mut hook = ConceptHook::new(&model, &naming, tables, intervention, window.clone());
            let hooked = model.forward(&tokens, Some(&mut hook)).map_err(|e| e.to_string())?;
            let report = hook.into_report();
            if report.is_empty() {
                return Err(format!("layer {hook_layer}: nothing matched in the window"));
            }
            for l in 0..=model.num_layers() {
                for p in 0..tokens.len() {
                    let must_match = l < hook_layer || p < window.start;
                    let (a, b) = (clean.record.hidden(l, p), hooked.record.hidden(l, p));
                    let same = a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits());
                    if must_match && !same {
                        return Err(format!(
                            "{intervention:?} at layer {hook_layer}: layer {l}, position {p} differs"
                        ));
                    }
                    checked += usize::from(must_match);
                }
            }
            let first = report.touches[0];
            let (a, b) = (
                clean.record.hidden(first.layer, first.position),
                hooked.record.hidden(first.layer, first.position),
            );
            if a == b {
                return Err(format!(
                    "{intervention:?} at layer {hook_layer}: touched state unchanged"
                ));
            }
        }
    }
    // generation: everything before the window start is untouched
    let prompt = &tokens[..100];
    let g_clean = model.generate(prompt, 40, None).map_err(|e| e.to_string())?;
    let tables: LayerTables = BTreeMap::from([(2, random_table(&model, 5))]);
    let mut hook = ConceptHook::new(&model, &naming, tables, Intervention::Patch, window.clone());
    let g_hooked = model.generate(prompt, 40, Some(&mut hook)).map_err(|e| e.to_string())?;
    for l in 0..=model.num_layers() {
        for p in 0..window.start {
            if g_clean.record.hidden(l, p) != g_hooked.record.hidden(l, p) {
                return Err(format!("generation: layer {l}, position {p} differs"));
            }
        }
    }
    let _ = d;
    Ok(format!(
        "{checked} (layer, position) states bit-identical across 12 hooked passes"
    ))
}

// ---------------------------------------------------------------- stats

/// Γ((ν+1)/2) / Γ(ν/2) by the two-step recurrence.
pub fn gamma_ratio(nu: u32) -> f64 {
    let (mut g, mut k) = if nu % 2 == 1 {
        (1.0 / std::f64::consts::PI.sqrt(), 1)
    } else {
        (std::f64::consts::PI.sqrt() / 2.0, 2)
    };
    while k < nu {
        g *= (k as f64 + 1.0) / k as f64;
        k += 2;
    }
    g
}

pub fn t_density(nu: u32, x: f64) -> f64 {
    let nu_f = f64::from(nu);
    gamma_ratio(nu) / (nu_f * std::f64::consts::PI).sqrt() * (1.0 + x * x / nu_f).powf(-(nu_f + 1.0) / 2.0)
}

/// 1/2 plus the composite-Simpson integral of the density from 0 to t.
pub fn t_cdf_oracle(nu: u32, t: f64) -> f64 {
    let n = 20_000;
    let h = t / n as f64;
    let mut s = t_density(nu, 0.0) + t_density(nu, t);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * t_density(nu, i as f64 * h);
    }
    0.5 + s * h / 3.0
}

/// (condition, mean %, SE %, t, p) as printed.
pub const PUBLISHED_T_ROWS: [(&str, f64, f64, f64, f64); 9] = [
    ("Layer 20 In-naming", 1.57, 0.84, 1.878, 0.042),
    ("Layer 20 Cross-naming", 1.79, 0.97, 1.846, 0.044),
    ("Layer 20 Random Gaussian", -0.36, 1.08, -0.332, 0.627),
    ("Layer 30 In-naming", 0.64, 1.29, 0.500, 0.313),
    ("Layer 30 Cross-naming", 1.36, 1.20, 1.133, 0.139),
    ("Layer 40 In-naming", 0.57, 0.92, 0.618, 0.274),
    ("Layer 40 Cross-naming", 1.43, 0.64, 2.249, 0.021),
    ("Layer 50 In-naming", 0.36, 1.01, 0.352, 0.365),
    ("Layer 50 Cross-naming", 0.93, 0.61, 1.531, 0.075),
];

/// Fourteen values with the given mean and standard error.
pub fn sample_with(mean: f64, se: f64) -> Vec<f64> {
    let z: Vec<f64> = (0..14).map(|i| f64::from(i) - 6.5).collect();
    let sd_z = (z.iter().map(|x| x * x).sum::<f64>() / 13.0).sqrt();
    let sd = se * 14f64.sqrt();
    z.iter().map(|x| mean + x / sd_z * sd).collect()
}

pub fn t_table_reproduction() -> Check {
    let mut worst = (0.0f64, 0.0f64);
    for (name, mean, se, t, p) in PUBLISHED_T_ROWS {
        let summary = TestResult::from_summary(mean / 100.0, se / 100.0, 14).map_err(|e| e.to_string())?;
        let sample = DeltaSample::new(sample_with(mean / 100.0, se / 100.0)).map_err(|e| e.to_string())?;
        let tested = one_sample_t(&sample).map_err(|e| e.to_string())?;
        for r in [summary, tested] {
            if r.df != 13 {
                return Err(format!("{name}: df {}", r.df));
            }
            let (dt, dp) = ((r.t - t).abs(), (r.p - p).abs());
            if dt > 0.02 || dp > 0.003 {
                return Err(format!("{name}: t {:.4} vs {t}, p {:.4} vs {p}", r.t, r.p));
            }
            worst = (worst.0.max(dt), worst.1.max(dp));
        }
    }
    let mut worst_cdf = 0.0f64;
    let dfs = [1u32, 2, 3, 4, 5, 7, 10, 13, 20, 30];
    let ts = [-4.0, -1.5, 0.3, 1.878, 3.5];
    for &df in &dfs {
        for &t in &ts {
            let err = (t_cdf(df, t) - t_cdf_oracle(df, t)).abs();
            if err > 1e-6 {
                return Err(format!("t_cdf({df}, {t}) off by {err:e}"));
            }
            worst_cdf = worst_cdf.max(err);
        }
    }
    Ok(format!(
        "9 rows, worst |dt| {:.4}, |dp| {:.4}; t_cdf on {} points, worst error {worst_cdf:.1e}",
        worst.0,
        worst.1,
        dfs.len() * ts.len()
    ))
}

// ---------------------------------------------------------------- pipeline

pub fn smoke_manifest(out: Option<std::path::PathBuf>) -> ExperimentManifest {
    let variant = |name: &str, kind, scale, timestamp| Variant {
        name: name.into(),
        kind,
        scale,
        window: [1500, 2500],
        layers: vec![2],
        timestamp,
        seed: 0,
        control: Default::default(),
    };
    ExperimentManifest {
        puzzles: PuzzleSource::Generate {
            blocks: 4,
            count: 10,
            seed: 0,
        },
        namings: vec![1, 2],
        template: fluidrep::obfuscation::TemplateKind::Mystery,
        relational: Default::default(),
        backend: ToyConfig {
            layers: 4,
            hidden_dim: 32,
            heads: 4,
            context_limit: 4096,
            seed: 0,
        },
        max_new: 16,
        extraction: fluidrep::cli::runner::ExtractionSettings {
            window: 1000,
            batch_size: None,
            extraction_puzzles: None,
        },
        exclude: vec![3],
        variants: vec![
            variant("s1", VectorKind::InNaming, 1.0, 2000),
            variant("s2of3", VectorKind::CrossNaming, 2.0 / 3.0, 1200),
        ],
        workers: None,
        output_dir: out,
    }
}

pub fn pipeline_smoke() -> Check {
    let started = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let manifest = smoke_manifest(None);
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let summary = run_manifest(&manifest, dir.path(), dir.path(), workers).map_err(|e| e.to_string())?;
    let rollouts = summary.cells.iter().filter(|c| c.condition == "baseline").count();
    if rollouts != 20 {
        return Err(format!("{rollouts} baseline rollouts"));
    }
    if let Some(c) = summary.cells.iter().find(|c| c.error.is_some()) {
        return Err(format!("cell failed: {c:?}"));
    }
    let reps = std::fs::read_to_string(dir.path().join("representations.csv")).map_err(|e| e.to_string())?;
    let stamps: BTreeSet<&str> = reps.lines().skip(1).filter_map(|l| l.split(',').nth(4)).collect();
    if stamps != BTreeSet::from(["1200", "2000"]) {
        return Err(format!("extraction timestamps {stamps:?}"));
    }
    if summary.accuracy["s1"] != summary.accuracy["baseline"] {
        return Err(format!(
            "s=1 accuracy {:?} differs from baseline {:?}",
            summary.accuracy["s1"], summary.accuracy["baseline"]
        ));
    }
    let texts = |cond: &str| -> BTreeMap<(u32, u32), String> {
        summary
            .cells
            .iter()
            .filter(|c| c.condition == cond)
            .map(|c| ((c.naming, c.puzzle), c.text_sha256.clone()))
            .collect()
    };
    if texts("s1") != texts("baseline") {
        return Err("s=1 generations differ from baseline".into());
    }
    let touched = summary
        .cells
        .iter()
        .filter(|c| c.condition != "baseline")
        .all(|c| c.touches > 0);
    if !touched {
        return Err("some steered cell touched nothing".into());
    }
    let ledger = std::fs::read_to_string(dir.path().join("ledger.csv")).map_err(|e| e.to_string())?;
    let took = started.elapsed();
    if took > Duration::from_secs(600) {
        return Err(format!("took {took:?}"));
    }
    Ok(format!(
        "20 rollouts, {} ledger rows, s=1 matches baseline in accuracy and text",
        ledger.lines().count() - 1
    ))
}

// ---------------------------------------------------------------- pca

pub fn pca_sanity() -> Check {
    let dir = [0.3, -1.2, 2.0, 0.7];
    let offset = [5.0, 1.0, -2.0, 0.0];
    let collinear: Vec<Vec<f64>> = [-2.0, -0.5, 0.0, 1.5, 4.0, 7.25]
        .iter()
        .map(|&a| offset.iter().zip(dir).map(|(o, d)| o + a * d).collect())
        .collect();
    let fit = pca_project(&collinear, 1).map_err(|e| e.to_string())?;
    let ratio = fit.explained_ratio[0];
    if (ratio - 1.0).abs() > 1e-6 {
        return Err(format!("collinear explained ratio {ratio}"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    // covariance route (d <= n) and Gram route (d > n)
    for (n, d) in [(8usize, 4usize), (5, 12)] {
        let points: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-4.0..4.0)).collect())
            .collect();
        let k = (n - 1).min(d);
        let fit = pca_project(&points, k).map_err(|e| e.to_string())?;
        let mean: Vec<f64> = (0..d)
            .map(|j| points.iter().map(|p| p[j]).sum::<f64>() / n as f64)
            .collect();
        for (p, coords) in points.iter().zip(&fit.coords) {
            let centered: Vec<f64> = p.iter().zip(&mean).map(|(x, m)| x - m).collect();
            let back = fit.reconstruct_centered(coords);
            let err = centered
                .iter()
                .zip(&back)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
                / l2(&centered);
            if err > 1e-5 {
                return Err(format!("n={n}, d={d}: reconstruction error {err:e}"));
            }
            worst = worst.max(err);
        }
    }
    Ok(format!(
        "collinear ratio {ratio:.9}; full-rank reconstruction worst error {worst:.1e}"
    ))
}
