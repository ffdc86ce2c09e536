use arearemap::areafn::AreaConfig;
use arearemap::diagnostics::max_diff;
use arearemap::relabel::relabel_project;
use arearemap::schemes::{run_with, Projection, SchemeConfig};
use arearemap::{Analytic, Grid, JacobianKind, Mode, ScalarField};

const AREA: AreaConfig = AreaConfig {
    budget: 200,
    richardson: true,
};

/// Change made by one relabelling after advecting a smooth bump for `t`.
fn projection_change(n: usize, t: f64) -> (f64, f64) {
    let g = Grid::square(n).unwrap();
    let bump = Analytic::Gaussian {
        amp: 1.0,
        x0: 0.6,
        y0: 0.5,
        ax: 60.0,
        ay: 60.0,
    };
    let steps = (t / (0.1 * g.h())).round() as usize;
    let cfg = SchemeConfig::new(
        JacobianKind::Arakawa,
        t / steps as f64,
        Mode::Liouville(Analytic::CELL_STREAM),
    )
    .unwrap();
    let w0 = ScalarField::sample(g, &bump, true).unwrap();
    let a0 = AREA.tabulate(&w0);
    let wt = run_with(&w0, &cfg, steps, &Projection::None, |_, _, _| Ok(())).unwrap();
    let relabelled = relabel_project(&wt, &a0, AREA.budget, AREA.richardson).unwrap();
    (max_diff(&relabelled, &wt).unwrap(), g.h())
}

#[test]
fn projection_change_scales_like_t_h_squared() {
    let t = 0.1;
    let c: Vec<f64> = [21, 41, 81, 161]
        .iter()
        .map(|&n| {
            let (d, h) = projection_change(n, t);
            d / (t * h * h)
        })
        .collect();
    // fit the constant on the two coarsest grids, then hold the finer ones to it
    let fitted = c[0].max(c[1]);
    for (k, ck) in c.iter().enumerate().skip(2) {
        assert!(
            *ck <= 1.5 * fitted,
            "grid {k}: C = {ck:.1} vs fitted {fitted:.1}"
        );
    }
}

#[test]
fn relabelling_is_nearly_idempotent_on_the_advection_run() {
    let w0 = ScalarField::sample(Grid::square(20).unwrap(), &Analytic::BLOB, true).unwrap();
    let cfg = SchemeConfig::new(
        JacobianKind::Arakawa,
        0.003,
        Mode::Liouville(Analytic::CELL_STREAM),
    )
    .unwrap();
    let a0 = AREA.tabulate(&w0);
    // the final state has just been relabelled (400 is a multiple of 10)
    let w = run_with(&w0, &cfg, 400, &Projection::Relabel(10, AREA), |_, _, _| {
        Ok(())
    })
    .unwrap();
    let again = relabel_project(&w, &a0, AREA.budget, AREA.richardson).unwrap();
    let d = max_diff(&again, &w).unwrap();
    assert!(d <= 1e-2, "second relabelling moved values by {d:.3e}");
}

#[test]
fn relabelling_the_initial_field_is_the_identity() {
    let w0 = ScalarField::sample(Grid::square(20).unwrap(), &Analytic::BLOB, true).unwrap();
    let a0 = AREA.tabulate(&w0);
    let same = relabel_project(&w0, &a0, AREA.budget, AREA.richardson).unwrap();
    assert!(max_diff(&same, &w0).unwrap() <= 1e-10);
}
