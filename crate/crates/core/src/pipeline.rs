//! One function per command: compute everything from a validated config, then
//! return the files to write. Nothing touches the disk until all numerics succeed.

use crate::config::{Direction, ModelKind, RunConfig, StartGuess};
use crate::continuation::{
    continue_branch, cosine_guess, newton_steady, relaxed_guess, switch_branch, Branch, EventKind, Stability,
    SteadyProblem, System,
};
use crate::cross::run_cross;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::limit::eps_sweep;
use crate::linstab::{max_growth_rate, mode_matrix, neutral_curve};
use crate::output::{gnuplot_script, header, Artifact, Cell, Table};
use crate::rd::{run, SeriesRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Linstab,
    NeutralCurve,
    Continue,
    EpsSweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Linstab => "linstab",
            Command::NeutralCurve => "neutral-curve",
            Command::Continue => "continue",
            Command::EpsSweep => "eps-sweep",
        }
    }
}

/// Runs `cmd` and returns its output files (not yet written).
pub fn execute(cmd: Command, cfg: &RunConfig) -> Result<Vec<Artifact>> {
    cfg.validate()?;
    let head = format!("command: {}\n{}", cmd.name(), header(&cfg.dump()));
    match cmd {
        Command::Simulate => simulate(cfg, &head),
        Command::Linstab => linstab(cfg, &head),
        Command::NeutralCurve => neutral(cfg, &head),
        Command::Continue => continuation(cfg, &head),
        Command::EpsSweep => sweep(cfg, &head),
    }
}

fn series_table(series: &[SeriesRow], with_defect: bool) -> Table {
    let mut t = if with_defect {
        Table::new(&["t", "mass", "min_v", "defect_L2"])
    } else {
        Table::new(&["t", "mass", "min_v"])
    };
    for r in series {
        let mut row: Vec<Cell> = vec![r.t.into(), r.mass.into(), r.min_v.into()];
        if with_defect {
            row.push(r.defect.unwrap_or(f64::NAN).into());
        }
        t.push(row);
    }
    t
}

fn snapshot_table(grid: &Grid, t: f64, names: &[&str], fields: &[&[f64]]) -> Table {
    let mut cols = vec!["t", "x"];
    if grid.dim() == 2 {
        cols.push("y");
    }
    cols.extend_from_slice(names);
    let mut table = Table::new(&cols);
    for idx in 0..grid.cells() {
        let (x, y) = grid.coords(idx);
        let mut row: Vec<Cell> = vec![t.into(), x.into()];
        if grid.dim() == 2 {
            row.push(y.into());
        }
        row.extend(fields.iter().map(|f| Cell::Float(f[idx])));
        table.push(row);
    }
    table
}

fn simulate(cfg: &RunConfig, head: &str) -> Result<Vec<Artifact>> {
    let spec = cfg.time.run_spec();
    let grid = cfg.grid()?;
    let params = cfg.params();
    let mut out = Vec::new();
    let names: Vec<&str>;
    match cfg.model.kind {
        ModelKind::CrossLimit => {
            let traj = run_cross(&params, cfg.time.dt, &spec, cfg.cross_initial()?)?;
            names = vec!["u", "v"];
            for (k, s) in traj.snapshots.iter().enumerate() {
                let table = snapshot_table(&grid, s.t, &names, &[s.u.values(), s.v.values()]);
                out.push(Artifact::csv(format!("snapshot_{k:03}.csv"), &table, head));
            }
            out.push(Artifact::csv("series.csv", &series_table(&traj.series, false), head));
        }
        _ => {
            let traj = run(&params, cfg.step_control(), &spec, cfg.rd_initial()?)?;
            names = vec!["u1", "u2", "v"];
            for (k, s) in traj.snapshots.iter().enumerate() {
                let table = snapshot_table(&grid, s.t, &names, &[s.u1.values(), s.u2.values(), s.v.values()]);
                out.push(Artifact::csv(format!("snapshot_{k:03}.csv"), &table, head));
            }
            out.push(Artifact::csv("series.csv", &series_table(&traj.series, true), head));
        }
    }
    let mut cols: Vec<(usize, &str)> = vec![(2, "mass"), (3, "min v")];
    if cfg.model.kind != ModelKind::CrossLimit {
        cols.push((4, "defect"));
    }
    out.push(Artifact {
        name: "series.gp".into(),
        contents: gnuplot_script("series.csv", "time series", "t", 1, &cols),
    });
    if grid.dim() == 1 && !out.is_empty() {
        let ycols: Vec<(usize, &str)> = names.iter().enumerate().map(|(i, n)| (i + 3, *n)).collect();
        out.push(Artifact {
            name: "snapshot.gp".into(),
            contents: gnuplot_script("snapshot_000.csv", "profiles", "x", 2, &ycols),
        });
    }
    Ok(out)
}

fn linstab(cfg: &RunConfig, head: &str) -> Result<Vec<Artifact>> {
    let which = cfg.model.kind.which();
    let params = cfg.params();
    let name = which.parameter_name();
    let mut t = Table::new(&[name, "lambda_max", "mode", "lambda_mode1"]);
    for value in cfg.linstab.values() {
        let (lambda, mode) = max_growth_rate(which, value, &params, cfg.linstab.n_max)?;
        let first = mode_matrix(which, 1, value, &params)?.growth_rate();
        t.push(vec![value.into(), lambda.into(), mode.into(), first.into()]);
    }
    Ok(vec![
        Artifact::csv("linstab.csv", &t, head),
        Artifact {
            name: "linstab.gp".into(),
            contents: gnuplot_script(
                "linstab.csv",
                "largest growth rate",
                name,
                1,
                &[(2, "max growth rate"), (4, "mode 1")],
            ),
        },
    ])
}

fn neutral(cfg: &RunConfig, head: &str) -> Result<Vec<Artifact>> {
    let which = cfg.model.kind.which();
    let params = cfg.params();
    let scan = cfg.neutral.scan();
    let mut t = Table::new(&["n", "parameter_name", "parameter", "D"]);
    for &n in &cfg.neutral.modes {
        let curve = neutral_curve(which, n, &scan, &params)?;
        for (p, d) in curve.points {
            t.push(vec![n.into(), which.parameter_name().into(), p.into(), d.into()]);
        }
    }
    let script = format!(
        "set datafile separator ','\nset datafile commentschars '#'\nset terminal pngcairo size 900,600\nset output 'neutral.png'\nset xlabel '{}'\nset ylabel 'D'\nplot 'neutral.csv' every ::1 using 3:4:1 with points palette pt 7 ps 0.4 title 'neutral curves'\n",
        which.parameter_name()
    );
    Ok(vec![
        Artifact::csv("neutral.csv", &t, head),
        Artifact {
            name: "neutral.gp".into(),
            contents: script,
        },
    ])
}

fn system_of(kind: ModelKind) -> System {
    match kind {
        ModelKind::Rd3Conserved => System::Conserved,
        ModelKind::Rd3Growth => System::Growth,
        ModelKind::CrossLimit => System::Limit,
    }
}

/// Continues from the configured start in the requested directions and
/// follows crossing branches at the first pitchforks found.
pub fn trace_branches(cfg: &RunConfig) -> Result<(SteadyProblem, Vec<Branch>)> {
    if cfg.grid.dim != 1 {
        return Err(Error::param("dim", "continuation runs on a 1D grid"));
    }
    let c = &cfg.continuation;
    let pb = SteadyProblem::new(
        system_of(cfg.model.kind),
        cfg.params(),
        Grid::line(cfg.grid.n, cfg.model.length)?,
    )?;
    let guess = match c.guess {
        StartGuess::Constant => pb.constant_state(c.start)?,
        StartGuess::Cosine => cosine_guess(&pb, c.start, c.amplitude, c.mode)?,
        StartGuess::Relax => relaxed_guess(&pb, c.start, c.amplitude, c.mode, c.relax_time, c.relax_dt)?,
    };
    let start = newton_steady(&pb, &guess, c.start)?;
    let ctrl = c.control();
    let mut branches = Vec::new();
    let dirs: &[f64] = match c.direction {
        Direction::Up => &[1.0],
        Direction::Down => &[-1.0],
        Direction::Both => &[1.0, -1.0],
    };
    for &dir in dirs {
        let b = continue_branch(&pb, &start, dir, &ctrl)?;
        let closed = b.stop == crate::continuation::StopReason::Closed;
        branches.push(b);
        if closed {
            break;
        }
    }
    let mut followed = 0;
    let mut k = 0;
    while k < branches.len() && followed < c.follow_pitchforks {
        let events: Vec<_> = branches[k].events_of(EventKind::Pitchfork).cloned().collect();
        for ev in events {
            if followed == c.follow_pitchforks {
                break;
            }
            followed += 1;
            let s = switch_branch(&pb, &ev, &ctrl)?;
            for dir in [1.0, -1.0] {
                let b = continue_branch(&pb, &s, dir, &ctrl)?;
                let closed = b.stop == crate::continuation::StopReason::Closed;
                branches.push(b);
                if closed {
                    break;
                }
            }
        }
        k += 1;
    }
    Ok((pb, branches))
}

fn continuation(cfg: &RunConfig, head: &str) -> Result<Vec<Artifact>> {
    let (pb, branches) = trace_branches(cfg)?;
    let name = pb.parameter_name();
    let mut pts = Table::new(&[
        "branch_id",
        "parameter",
        "arclength",
        "value_at_x0",
        "stability",
        "event",
    ]);
    let mut evs = Table::new(&[
        "branch_id",
        "kind",
        "parameter",
        "value_at_x0",
        "real_crossing",
        "null_parity",
    ]);
    let label = |s: Stability| match s {
        Stability::Stable => "stable",
        Stability::Unstable => "unstable",
    };
    for (id, b) in branches.iter().enumerate() {
        let mut rows: Vec<(f64, Vec<Cell>)> = b
            .points
            .iter()
            .map(|p| {
                (
                    p.arclength,
                    vec![
                        id.into(),
                        p.parameter.into(),
                        p.arclength.into(),
                        pb.value_at_x0(&p.state).into(),
                        label(p.stability).into(),
                        "".into(),
                    ],
                )
            })
            .collect();
        for e in &b.events {
            let p = &e.point;
            rows.push((
                p.arclength,
                vec![
                    id.into(),
                    p.parameter.into(),
                    p.arclength.into(),
                    pb.value_at_x0(&p.state).into(),
                    label(p.stability).into(),
                    e.kind.label().into(),
                ],
            ));
            evs.push(vec![
                id.into(),
                e.kind.label().into(),
                e.parameter.into(),
                pb.value_at_x0(&p.state).into(),
                (if e.real_crossing { "yes" } else { "no" }).into(),
                e.null_parity.unwrap_or(f64::NAN).into(),
            ]);
        }
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (_, r) in rows {
            pts.push(r);
        }
    }
    let script = format!(
        "set datafile separator ','\nset datafile commentschars '#'\nset terminal pngcairo size 900,600\nset output 'branches.png'\nset xlabel '{name}'\nset ylabel 'u1+u2 at x=0'\nplot 'branches.csv' every ::1 using 2:(stringcolumn(5) eq 'stable' ? $4 : 1/0) with points pt 7 ps 0.5 title 'stable', \\\n     'branches.csv' every ::1 using 2:(stringcolumn(5) eq 'unstable' ? $4 : 1/0) with points pt 6 ps 0.5 title 'unstable', \\\n     'events.csv' every ::1 using 3:4 with points pt 4 ps 1.5 title 'events'\n"
    );
    Ok(vec![
        Artifact::csv("branches.csv", &pts, head),
        Artifact::csv("events.csv", &evs, head),
        Artifact {
            name: "branches.gp".into(),
            contents: script,
        },
    ])
}

fn sweep(cfg: &RunConfig, head: &str) -> Result<Vec<Artifact>> {
    let report = eps_sweep(&cfg.params(), &cfg.sweep)?;
    let mut t = Table::new(&["eps", "gap_u_L2", "gap_v_L2", "defect_L2", "rel21_residual"]);
    for r in &report.rows {
        t.push(vec![
            r.eps.into(),
            r.gap_u.into(),
            r.gap_v.into(),
            r.defect.into(),
            r.slow_split.into(),
        ]);
    }
    for (eps, e) in &report.failures {
        t.footer.push(format!("failed eps={eps:.12e}: {e}"));
    }
    let fmt = |s: Option<f64>| s.map_or("nan".to_string(), |x| format!("{x:.6}"));
    let sl = report.slopes;
    t.footer.push(format!(
        "slopes: gap_u={} gap_v={} defect={} rel21={}",
        fmt(sl.gap_u),
        fmt(sl.gap_v),
        fmt(sl.defect),
        fmt(sl.slow_split)
    ));
    let script = "set datafile separator ','\nset datafile commentschars '#'\nset terminal pngcairo size 900,600\nset output 'sweep.png'\nset logscale xy\nset xlabel 'eps'\nset key autotitle columnhead\nplot for [c=2:5] 'sweep.csv' using 1:c with linespoints\n";
    Ok(vec![
        Artifact::csv("sweep.csv", &t, head),
        Artifact {
            name: "sweep.gp".into(),
            contents: script.into(),
        },
    ])
}
