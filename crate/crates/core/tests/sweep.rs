use gcbf_core::feasibility::{violation_inevitable, AccelAxis, Axis};
use gcbf_core::{
    compare_regions, run_scenario, sweep, CellLabel, ConstraintStrategy, GridSpec, Scenario,
};

fn grid(workers: usize) -> GridSpec {
    GridSpec {
        delta_d: Axis {
            min: -10.0,
            max: 10.0,
            points: 6,
        },
        delta_v: Axis {
            min: -5.0,
            max: 5.0,
            points: 5,
        },
        a_f: AccelAxis::Fixed { value: 0.0 },
        steps: 30,
        workers,
    }
}

#[test]
fn worker_count_does_not_change_the_map() {
    let s = Scenario::acc_default();
    for strategy in [
        ConstraintStrategy::Gcbf { lambda: 0.01, m: 2 },
        ConstraintStrategy::Pointwise { n_c: 10 },
    ] {
        let one = sweep(&grid(1), &s, strategy).unwrap();
        let three = sweep(&grid(3), &s, strategy).unwrap();
        assert_eq!(one.cells, three.cells);
        assert_eq!(one.cells.len(), 30);
    }
}

#[test]
fn cells_match_single_runs() {
    let s = Scenario::acc_default();
    let strategy = ConstraintStrategy::Pointwise { n_c: 50 };
    let g = grid(0);
    let map = sweep(&g, &s, strategy).unwrap();
    let model = s.model().unwrap();
    let w0 = s.profile().unwrap().at(0);
    for cell in &map.cells {
        let x0 = [cell.delta_d, cell.delta_v, 0.0];
        let unsafe_start = model.barrier.value(&x0, w0) > 0.0;
        assert_eq!(cell.label == CellLabel::UnsafeAtT0, unsafe_start);
        if !unsafe_start {
            let mut single = s.clone().with_strategy(strategy).with_initial_state(&x0);
            single.steps = g.steps;
            let (_, outcome) = run_scenario(&single).unwrap();
            assert_eq!(cell.label, CellLabel::from_status(&outcome.status));
        }
    }
}

#[test]
fn self_comparison_is_empty() {
    let map = sweep(
        &grid(0),
        &Scenario::acc_default(),
        ConstraintStrategy::Pointwise { n_c: 10 },
    )
    .unwrap();
    let cmp = compare_regions(&map, &map).unwrap();
    assert_eq!((cmp.only_a, cmp.only_b, cmp.difference), (0, 0, 0));
    assert!(cmp.raster.iter().all(|d| *d == 0));
}

#[test]
fn mismatched_grids_are_rejected() {
    let s = Scenario::acc_default();
    let a = sweep(&grid(0), &s, ConstraintStrategy::Pointwise { n_c: 10 }).unwrap();
    let mut g = grid(0);
    g.delta_d.points = 5;
    let b = sweep(&g, &s, ConstraintStrategy::Pointwise { n_c: 10 }).unwrap();
    assert!(compare_regions(&a, &b).is_err());
}

#[test]
fn feasible_pointwise_cells_are_not_doomed() {
    let s = Scenario::acc_default();
    let map = sweep(&grid(0), &s, ConstraintStrategy::Pointwise { n_c: 50 }).unwrap();
    for cell in map.cells.iter().filter(|c| c.label.is_feasible()) {
        assert!(!violation_inevitable(&s, &[cell.delta_d, cell.delta_v, 0.0]).unwrap());
    }
}

#[test]
fn deep_interior_cells_are_feasible() {
    let mut g = grid(0);
    g.delta_d = Axis {
        min: 10.0,
        max: 12.0,
        points: 2,
    };
    g.delta_v = Axis {
        min: -0.5,
        max: 0.5,
        points: 2,
    };
    g.steps = 150;
    let s = Scenario::acc_default();
    for strategy in [
        ConstraintStrategy::Gcbf { lambda: 0.01, m: 2 },
        ConstraintStrategy::Pointwise { n_c: 50 },
        ConstraintStrategy::Pointwise { n_c: 10 },
    ] {
        let map = sweep(&g, &s, strategy).unwrap();
        assert_eq!(map.feasible_count(), 4, "{strategy}");
    }
}

#[test]
fn acceleration_sweep_is_a_conjunction() {
    let s = Scenario::acc_default();
    let strategy = ConstraintStrategy::Pointwise { n_c: 10 };
    let mut g = grid(0);
    g.a_f = AccelAxis::Sweep {
        values: vec![-2.0, 0.0, 2.0],
    };
    let joint = sweep(&g, &s, strategy).unwrap();
    let per: Vec<_> = [-2.0, 0.0, 2.0]
        .iter()
        .map(|&a| {
            let mut gi = grid(0);
            gi.a_f = AccelAxis::Fixed { value: a };
            sweep(&gi, &s, strategy).unwrap()
        })
        .collect();
    for (i, cell) in joint.cells.iter().enumerate() {
        let all = per.iter().all(|m| m.cells[i].label.is_feasible());
        assert_eq!(cell.label.is_feasible(), all);
    }
}
