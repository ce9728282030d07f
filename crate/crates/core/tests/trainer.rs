use orbit_core::ansatz::{init_params, Ansatz, Layout, Mixer, ParamSet};
use orbit_core::graph::{brute_force_maxcut, generators, Graph};
use orbit_core::optim::grad_param_shift;
use orbit_core::trainer::{
    read_jsonl, train, train_from, Order, RunStatus, StepRecord, Strategy, TrainerConfig,
};
use orbit_core::EvalMode;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cfg(strategy: &str, layers: usize) -> TrainerConfig {
    let mut c = TrainerConfig::new(strategy.parse().unwrap(), layers);
    c.eval = EvalMode::Analytic;
    c.param_seed = 3;
    c.shot_seed = 7;
    c
}

/// Records with the wall clock zeroed, the only field allowed to vary.
fn timeless(records: &[StepRecord]) -> Vec<StepRecord> {
    records
        .iter()
        .cloned()
        .map(|mut r| {
            r.wall_ns = 0;
            r
        })
        .collect()
}

fn jsonl(records: &[StepRecord]) -> Vec<u8> {
    let mut out = Vec::new();
    orbit_core::trainer::write_jsonl(&timeless(records), &mut out).unwrap();
    out
}

fn pl6() -> Graph {
    generators::power_law_tree(6, 1).unwrap()
}

#[test]
fn orbit_single_layer_is_masked_full_training() {
    let g = pl6();
    let h = train(&g, &cfg("orbit", 1)).unwrap();
    assert_eq!(h.status, RunStatus::Converged);
    let last = h.records.last().unwrap();
    assert!(last.delta.abs() < 1e-3);
    assert!(h.records[..h.len() - 1].iter().all(|r| r.delta.abs() >= 1e-3));
    assert!(h.records.iter().all(|r| r.unit == "l0"));
}

#[test]
fn huge_epsilon_freezes_every_layer_on_first_visit() {
    let g = pl6();
    for p in [1, 3, 5] {
        let mut c = cfg("orbit", p);
        c.epsilon = 1e9;
        let h = train(&g, &c).unwrap();
        assert_eq!(h.len(), p);
        assert_eq!(h.records.last().unwrap().active, Vec::<usize>::new());
        for (i, r) in h.records.iter().enumerate() {
            assert_eq!(r.unit, format!("l{i}"));
            assert_eq!(r.active, (i + 1..p).collect::<Vec<_>>());
        }
    }
    let mut c = cfg("ma", 3);
    c.epsilon = 1e9;
    assert_eq!(train(&g, &c).unwrap().len(), 1);
}

#[test]
fn orbit_active_set_is_removal_only() {
    for (model, seed) in [("pl", 0), ("er", 1), ("sk", 2)] {
        let g = orbit_core::graph::GraphModel::from_name(model).unwrap().generate(6, seed).unwrap();
        for eval in [EvalMode::Analytic, EvalMode::Shots(256)] {
            let mut c = cfg("orbit", 4);
            c.eval = eval;
            let h = train(&g, &c).unwrap();
            let mut prev: Vec<usize> = (0..4).collect();
            for r in &h.records {
                assert!(r.active.iter().all(|a| prev.contains(a)), "{model}: {:?} -> {:?}", prev, r.active);
                prev = r.active.clone();
            }
            for w in h.records.windows(2) {
                assert!(w[1].step == w[0].step + 1);
                assert!((w[1].cost_before - w[0].cost_after).abs() < 1e-9 || matches!(eval, EvalMode::Shots(_)));
            }
        }
    }
}

#[test]
fn identical_seeds_give_identical_histories() {
    let g = pl6();
    for s in Strategy::ALL_NAMES {
        let mut c = cfg(s, 3);
        c.eval = EvalMode::Shots(128);
        c.lma_fixed_steps = 5;
        c.max_steps = 300;
        let a = train(&g, &c).unwrap();
        let b = train(&g, &c).unwrap();
        assert_eq!(jsonl(&a.records), jsonl(&b.records), "{s}");
        assert_eq!(a.final_params, b.final_params, "{s}");
    }
}

#[test]
fn random_order_visits_each_active_layer_once_per_cycle() {
    let g = pl6();
    let mut c = cfg("rr", 4);
    c.order = Order::Random(5);
    let h = train(&g, &c).unwrap();
    for chunk in h.records.chunks(4) {
        if chunk.len() == 4 {
            let mut units: Vec<&str> = chunk.iter().map(|r| r.unit.as_str()).collect();
            units.sort();
            assert_eq!(units, ["l0", "l1", "l2", "l3"]);
            assert!(chunk.iter().all(|r| r.epoch == chunk[0].epoch));
        }
    }
    let seq = train(&g, &cfg("rr", 4)).unwrap();
    assert_ne!(
        h.records.iter().map(|r| r.unit.clone()).collect::<Vec<_>>(),
        seq.records.iter().map(|r| r.unit.clone()).collect::<Vec<_>>()
    );
}

#[test]
fn rr_single_layer_matches_orbit() {
    let g = pl6();
    let a = train(&g, &cfg("rr", 1)).unwrap();
    let b = train(&g, &cfg("orbit", 1)).unwrap();
    let strip = |rs: &[StepRecord]| -> Vec<(f64, f64)> { rs.iter().map(|r| (r.cost_before, r.cost_after)).collect() };
    assert_eq!(strip(&a.records), strip(&b.records));
}

#[test]
fn rr_never_freezes_and_stops_after_a_quiet_cycle() {
    let g = pl6();
    let h = train(&g, &cfg("rr", 3)).unwrap();
    assert_eq!(h.status, RunStatus::Converged);
    assert_eq!(h.len() % 3, 0);
    assert!(h.records.iter().all(|r| r.active == vec![0, 1, 2]));
    let tail = &h.records[h.len() - 3..];
    assert!(tail.iter().all(|r| r.delta.abs() < 1e-3));
    // every earlier cycle had a large change somewhere
    for cycle in h.records[..h.len() - 3].chunks(3) {
        assert!(cycle.iter().any(|r| r.delta.abs() >= 1e-3));
    }
}

#[test]
fn ma_first_step_uses_the_full_gradient() {
    let g = pl6();
    let mut c = cfg("ma", 2);
    c.max_steps = 1;
    let h = train(&g, &c).unwrap();
    assert_eq!(h.status, RunStatus::BudgetExhausted);
    let p0 = init_params(&g, 2, Layout::MultiAngle, Mixer::X, 3).unwrap();
    let a = Ansatz::new(&g, 2, Layout::MultiAngle, Mixer::X).unwrap();
    let grad = grad_param_shift(&a, &p0, EvalMode::Analytic, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    for i in 0..p0.len() {
        let g_i = grad.values[i];
        let want = p0.values()[i] - 0.1 * g_i / (g_i.abs() + 1e-8);
        assert_eq!(h.final_params.values()[i], want);
    }
}

#[test]
fn lma_fixed_budget_logs_layers_times_budget() {
    let g = pl6();
    let h = train(&g, &cfg("lma", 5)).unwrap();
    assert_eq!(h.len(), 250);
    assert_eq!(h.status, RunStatus::Converged);
    for (i, r) in h.records.iter().enumerate() {
        assert_eq!(r.unit, format!("l{}", i / 50));
        assert_eq!(r.epoch, i / 50);
    }
    let mut c = cfg("lsa", 5);
    c.lma_fixed_steps = 10;
    assert_eq!(train(&g, &c).unwrap().len(), 50);
}

#[test]
fn lma_never_touches_a_finished_layer() {
    let g = pl6();
    let mut c = cfg("lma", 3);
    c.lma_fixed_steps = 12;
    let full = train(&g, &c).unwrap();
    let init = init_params(&g, 3, Layout::MultiAngle, Mixer::X, 3).unwrap();
    for stage in 0..3 {
        let mut partial = c.clone();
        partial.max_steps = 12 * (stage + 1);
        let h = train(&g, &partial).unwrap();
        for l in 0..=stage {
            let a: Vec<u64> = h.final_params.layer_values(l).iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = full.final_params.layer_values(l).iter().map(|v| v.to_bits()).collect();
            assert_eq!(a, b, "layer {l} changed after stage {stage}");
        }
        for l in stage + 1..3 {
            assert_eq!(h.final_params.layer_values(l), init.layer_values(l));
        }
    }
}

#[test]
fn lma_plus_single_layer_matches_ma() {
    let g = pl6();
    let a = train(&g, &cfg("lma+", 1)).unwrap();
    let b = train(&g, &cfg("ma", 1)).unwrap();
    assert_eq!(a.len(), b.len());
    for (x, y) in a.records.iter().zip(&b.records) {
        assert_eq!((x.cost_before, x.cost_after), (y.cost_before, y.cost_after));
    }
    assert_eq!(a.final_params, b.final_params);
}

#[test]
fn lma_plus_advances_on_small_change() {
    let g = pl6();
    let h = train(&g, &cfg("lma+", 3)).unwrap();
    let mut stage = 0;
    for w in h.records.windows(2) {
        if w[1].unit != w[0].unit {
            assert!(w[0].delta.abs() < 1e-3);
            stage += 1;
            assert_eq!(w[1].unit, format!("l{stage}"));
        } else {
            assert!(w[0].delta.abs() >= 1e-3);
        }
    }
    assert_eq!(stage, 2);
}

#[test]
fn sublayer_one_equals_orbit() {
    let g = pl6();
    for eval in [EvalMode::Analytic, EvalMode::Shots(512)] {
        let mut a = cfg("orbit", 4);
        a.eval = eval;
        let mut b = a.clone();
        b.strategy = "sublayer-1".parse().unwrap();
        let x = train(&g, &a).unwrap();
        let y = train(&g, &b).unwrap();
        assert_eq!(jsonl(&x.records), jsonl(&y.records));
    }
}

#[test]
fn sublayer_units_and_freezing() {
    let g = pl6();
    let h = train(&g, &cfg("sublayer-2", 3)).unwrap();
    assert!(h.records.iter().take(6).map(|r| r.unit.as_str()).eq(["l0.b0", "l0.b1", "l1.b0", "l1.b1", "l2.b0", "l2.b1"]));
    let mut prev: Vec<usize> = (0..6).collect();
    for r in &h.records {
        assert!(r.active.iter().all(|a| prev.contains(a)));
        prev = r.active.clone();
    }
    assert!(prev.is_empty());
    let h = train(&g, &cfg("sublayer-0.5", 5)).unwrap();
    assert_eq!(h.records[0].unit, "l0+l1");
    assert_eq!(h.records[2].unit, "l4");
}

#[test]
fn parallel_halves_keep_their_own_updates() {
    let g = pl6();
    let mut c = cfg("sublayer-2-parallel", 2);
    c.max_steps = 1;
    let h = train(&g, &c).unwrap();
    assert_eq!(h.records[0].unit, "l0");
    let p0 = init_params(&g, 2, Layout::MultiAngle, Mixer::X, 3).unwrap();
    let per = p0.shape().per_layer();
    // layer 1 untouched, layer 0 moved
    assert_eq!(h.final_params.layer_values(1), p0.layer_values(1));
    assert!((0..per).all(|i| h.final_params.values()[i] != p0.values()[i]));
}

#[test]
fn single_angle_on_a_ring_keeps_multi_angle_tied() {
    // On a ring every edge and qubit is equivalent, so multi-angle training
    // from tied parameters stays tied at every step.
    let g = Graph::unweighted(6, (0..6).map(|i| (i, (i + 1) % 6))).unwrap();
    let sa = init_params(&g, 1, Layout::SingleAngle, Mixer::X, 1).unwrap();
    let tied = sa.tied_multi_angle(&g, Mixer::X).unwrap();
    let maxcut = brute_force_maxcut(&g).unwrap().max_value;
    for steps in 1..=6 {
        let mut c = cfg("ma", 1);
        c.max_steps = steps;
        let h = train_from(&g, &c, tied.clone(), maxcut).unwrap();
        let v = h.final_params.values();
        assert!(v[..6].iter().all(|x| (x - v[0]).abs() < 1e-12));
        assert!(v[6..].iter().all(|x| (x - v[6]).abs() < 1e-12));
        // the tied multi-angle point is a single-angle point
        let back = ParamSet::from_values(Layout::SingleAngle, sa.shape(), vec![2.0 * v[0], v[6]]).unwrap();
        let e_sa = Ansatz::new(&g, 1, Layout::SingleAngle, Mixer::X)
            .unwrap()
            .objective(&back, EvalMode::Analytic, &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap();
        assert!((e_sa - h.records.last().unwrap().cost_after).abs() < 1e-12);
    }
}

#[test]
fn single_angle_strategies_run_on_two_parameters_per_layer() {
    let g = pl6();
    for s in ["sa", "lsa", "lsa+"] {
        let mut c = cfg(s, 3);
        c.lma_fixed_steps = 5;
        let h = train(&g, &c).unwrap();
        assert_eq!(h.final_params.layout(), Layout::SingleAngle);
        assert_eq!(h.final_params.len(), 6);
        assert!(h.final_acr() > 0.5);
    }
    let mut c = cfg("orbit", 3);
    c.layout = Some(Layout::SingleAngle);
    assert_eq!(train(&g, &c).unwrap().final_params.len(), 6);
}

#[test]
fn shot_deltas_are_multiples_of_inverse_shots() {
    let g = pl6();
    for s in ["ma", "orbit", "rr", "lma+", "sublayer-2"] {
        let mut c = cfg(s, 3);
        c.eval = EvalMode::Shots(64);
        c.max_steps = 200;
        let h = train(&g, &c).unwrap();
        for r in &h.records {
            let k = r.delta * 64.0;
            assert_eq!(k, k.round(), "{s}: {}", r.delta);
            assert!(r.acr_analytic.is_some());
        }
    }
}

#[test]
fn budget_exhaustion_is_flagged() {
    let g = pl6();
    let mut c = cfg("orbit", 3);
    c.max_steps = 4;
    let h = train(&g, &c).unwrap();
    assert_eq!(h.status, RunStatus::BudgetExhausted);
    assert_eq!(h.len(), 4);
}

#[test]
fn history_round_trips_through_json_lines() {
    let g = pl6();
    let mut c = cfg("orbit", 2);
    c.eval = EvalMode::Shots(64);
    let h = train(&g, &c).unwrap();
    let mut buf = Vec::new();
    h.write_jsonl(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), h.len());
    assert_eq!(read_jsonl(&text).unwrap(), h.records);
    let first = text.lines().next().unwrap();
    let v: serde_json::Value = serde_json::from_str(first).unwrap();
    let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(|k| k.as_str()).collect();
    keys.sort();
    assert_eq!(
        keys,
        ["acr", "acr_analytic", "active", "cost_after", "cost_before", "delta", "epoch", "step", "unit", "wall_ns"]
    );

    let mut csv = Vec::new();
    h.write_csv(&mut csv).unwrap();
    let csv = String::from_utf8(csv).unwrap();
    assert_eq!(csv.lines().count(), h.len() + 1);
    assert!(csv.starts_with("step,epoch,unit,cost_before,cost_after,delta,acr,acr_analytic,active,wall_ns\n"));

    assert!(read_jsonl("{\"step\": 1}").is_err());
    let twice = format!("{first}\n{first}\n");
    assert!(matches!(read_jsonl(&twice), Err(orbit_core::Error::Parse { line: 2, .. })));
}
