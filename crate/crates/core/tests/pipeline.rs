use sonoloc::geometry::Point3;
use sonoloc::harness::{random_trajectories, run_fix, sweep_snr, LayoutSpec, Pipeline, SimConfig, Trajectory};

fn config(layout: &str) -> SimConfig {
    let mut cfg = SimConfig::default();
    cfg.scene.layout = LayoutSpec::Named(layout.into());
    cfg
}

#[test]
fn error_components_decompose() {
    let p = Pipeline::new(&config("original")).unwrap();
    for r in p.random_fixes(40, 10.0, 3) {
        assert!(r.ok, "{}", r.error);
        assert!((r.err_xy.powi(2) - r.err_x.powi(2) - r.err_y.powi(2)).abs() < 1e-12);
        assert!((r.err_3d.powi(2) - r.err_xy.powi(2) - r.err_z.powi(2)).abs() < 1e-12);
        assert!(r.err_z >= 0.0 && r.err_x >= 0.0);
    }
}

#[test]
fn fixes_repeat_under_a_fixed_seed() {
    let p = Pipeline::new(&config("optimized")).unwrap();
    let a = p.random_fixes(12, 15.0, 77);
    let b = p.random_fixes(12, 15.0, 77);
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.estimated_position, y.estimated_position);
        assert_eq!(x.true_position, y.true_position);
    }
    let c = p.random_fixes(12, 15.0, 78);
    assert!(a.iter().zip(&c).any(|(x, y)| x.true_position != y.true_position));
}

#[test]
fn run_fix_rejects_positions_outside_the_domain() {
    let cfg = config("original");
    assert!(run_fix(&cfg, Point3::new(0.1, 2.5, 1.0), 1).is_err());
    assert!(run_fix(&cfg, Point3::new(2.5, 2.5, 1.5), 1).unwrap().ok);
}

#[test]
fn sweep_error_does_not_grow_with_snr() {
    let mut cfg = config("original");
    cfg.channel.multipath = false;
    let s = sweep_snr(&cfg, &[-20.0, 0.0, 20.0], 30).unwrap();
    let e: Vec<f64> = s.rows.iter().map(|r| r.err_3d.mean).collect();
    assert!(e[2] <= e[1] * 1.05 && e[1] <= e[0] * 1.05, "{e:?}");
    assert!(e[0] > e[2], "{e:?}");
    assert_eq!(s.records.len(), 90);
    assert!(sweep_snr(&cfg, &[10.0], 10).is_err());
}

/// Geometry alone: with multipath off the optimized beacons win on every path.
#[test]
fn optimized_layout_reduces_error_on_each_trajectory() {
    let per_path = |layout: &str| {
        let mut cfg = config(layout);
        cfg.channel.multipath = false;
        cfg.fusion.enabled = false;
        cfg.channel.snr_db = 0.0;
        let p = Pipeline::new(&cfg).unwrap();
        random_trajectories(&cfg, 7, 5)
            .unwrap()
            .iter()
            .enumerate()
            .map(|(k, t)| p.trajectory(t, cfg.channel.snr_db, 100 + k as u64).unwrap().summary)
            .collect::<Vec<_>>()
    };
    let (orig, opt) = (per_path("original"), per_path("optimized"));
    for (k, (a, b)) in orig.iter().zip(&opt).enumerate() {
        assert_eq!(a.failed + b.failed, 0);
        assert!(b.mean_err_z < a.mean_err_z && b.mean_err_3d < a.mean_err_3d, "trajectory {k}: {a:?} vs {b:?}");
    }
}

#[test]
fn straight_line_trajectory_localizes_every_fix() {
    let cfg = config("optimized");
    let p = Pipeline::new(&cfg).unwrap();
    let t = Trajectory::line(Point3::new(0.5, 0.5, 0.5), Point3::new(4.5, 4.5, 3.0), 0.25, &p.domain).unwrap();
    let n = t.fixes().len();
    let run = p.trajectory(&t, 15.0, 9).unwrap();
    assert_eq!(run.records.len(), n);
    assert_eq!(run.summary.fixes, n);
    assert_eq!(run.summary.failed, 0);
    for (i, r) in run.records.iter().enumerate() {
        assert_eq!(r.id, i as u64);
    }
    // A fix whose peak locks onto an echo is off by decimetres; all others
    // sit at the sampling floor.
    let fine = run.records.iter().filter(|r| r.err_3d <= 0.015).count();
    assert!(fine * 10 >= n * 9, "{fine}/{n} fixes within 1.5 cm");
}
