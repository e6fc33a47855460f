//! Subcommand pipelines. Each writes its CSV tables and one JSON summary.

use std::f64::consts::PI;
use std::path::PathBuf;

use clap::Args;
use ep3_core::arc::{classify, crossing_average, sweep, ArcClass, ArcTrace, SweepSpec};
use ep3_core::encircle::{detect_conversions, track_loop, Contour, Direction, LoopTrajectory, MonodromyResult};
use ep3_core::eplocate::{locate as locate_eps, LocatedEp, ScanBox};
use ep3_core::phase::{accumulate_phase, detect_phase_switch, PhaseSeries, SwitchReport};
use serde::Serialize;
use serde_json::json;

use crate::output::{num, OutDir, Table};
use crate::{trajectory, CliError, Context};

const PAIRS: [(usize, usize); 3] = [(1, 2), (2, 3), (1, 3)];

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or("expected two labels such as 2,3")?;
    let a: usize = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b: usize = b.trim().parse().map_err(|e| format!("{e}"))?;
    if a == b || !(1..=3).contains(&a) || !(1..=3).contains(&b) {
        return Err("labels must be two distinct values in 1..=3".into());
    }
    Ok((a.min(b), a.max(b)))
}

#[derive(Args, Debug)]
pub struct ArcArgs {
    /// Detuning values, one sweep each
    #[arg(long, required = true, num_args = 1.., allow_negative_numbers = true)]
    delta: Vec<f64>,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    lambda_start: f64,
    #[arg(long, default_value_t = 0.6, allow_negative_numbers = true)]
    lambda_end: f64,
    /// Frames per sweep, endpoints included
    #[arg(long, default_value_t = 2000)]
    steps: usize,
    /// Branch pair to classify, e.g. 2,3 (all pairs if omitted)
    #[arg(long, value_parser = parse_pair)]
    pair: Option<(usize, usize)>,
}

#[derive(Serialize)]
struct SweepSummary {
    delta: f64,
    spec: SweepSpec,
    classes: Vec<ArcClass>,
    match_warnings: usize,
}

fn arc_table(trace: &ArcTrace) -> Table {
    let mut t = Table::new(&["lambda_re", "lambda_im", "re_e1", "im_e1", "re_e2", "im_e2", "re_e3", "im_e3"]);
    for f in &trace.frames {
        let mut row = vec![num(f.point.lambda_re), num(f.point.lambda_im)];
        for e in f.frame.values {
            row.push(num(e.re));
            row.push(num(e.im));
        }
        t.push(row);
    }
    t
}

fn run_sweep(ctx: &Context, spec: &SweepSpec, pairs: &[(usize, usize)]) -> Result<(ArcTrace, SweepSummary), CliError> {
    let trace = sweep(&ctx.cfg, spec)?;
    let classes = pairs.iter().map(|&p| classify(&trace, p)).collect::<Result<Vec<_>, _>>()?;
    let summary = SweepSummary { delta: spec.delta, spec: *spec, classes, match_warnings: trace.warnings.len() };
    Ok((trace, summary))
}

pub fn arc(ctx: &Context, a: &ArcArgs, out: &mut OutDir) -> Result<(), CliError> {
    let pairs: Vec<_> = a.pair.map_or(PAIRS.to_vec(), |p| vec![p]);
    let mut sweeps = Vec::new();
    for &delta in &a.delta {
        let spec = SweepSpec {
            delta,
            lambda_re_start: a.lambda_start,
            lambda_re_end: a.lambda_end,
            steps: a.steps,
            policy: ctx.policy,
        };
        let (trace, summary) = run_sweep(ctx, &spec, &pairs)?;
        out.write_csv(&format!("arc_delta_{delta}.csv"), &arc_table(&trace))?;
        sweeps.push(summary);
    }
    // Two detunings and one pair: also estimate the EP between them.
    let estimate = match (a.delta.as_slice(), a.pair) {
        (&[d0, d1], Some(pair)) => {
            let template = SweepSpec {
                delta: d0,
                lambda_re_start: a.lambda_start,
                lambda_re_end: a.lambda_end,
                steps: a.steps,
                policy: ctx.policy,
            };
            match crossing_average(&ctx.cfg, d0.min(d1), d0.max(d1), &template, pair) {
                Ok(c) => json!({ "delta_mid": c.delta_mid, "lambda_estimate": c.lambda_estimate }),
                Err(e) => json!({ "error": e.to_string() }),
            }
        }
        _ => serde_json::Value::Null,
    };
    out.write_json("arc.json", &json!({ "sweeps": sweeps, "ep_estimate": estimate }))
}

#[derive(Args, Debug)]
pub struct LocateArgs {
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    delta_min: f64,
    #[arg(long, default_value_t = 1.6, allow_negative_numbers = true)]
    delta_max: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    lambda_min: f64,
    #[arg(long, default_value_t = 0.6, allow_negative_numbers = true)]
    lambda_max: f64,
    /// Grid points per axis
    #[arg(long, default_value_t = 64)]
    grid: usize,
}

pub fn locate(ctx: &Context, a: &LocateArgs, out: &mut OutDir) -> Result<(), CliError> {
    let area = ScanBox {
        delta: (a.delta_min, a.delta_max),
        lambda_re: (a.lambda_min, a.lambda_max),
        n_delta: a.grid,
        n_lambda: a.grid,
    };
    let eps = locate_eps(&ctx.cfg, &ctx.policy, &area)?;
    out.write_json("locate.json", &json!({ "scan": area_json(&area), "eps": eps }))
}

fn area_json(area: &ScanBox) -> serde_json::Value {
    json!({
        "delta": [area.delta.0, area.delta.1],
        "lambda_re": [area.lambda_re.0, area.lambda_re.1],
        "n_delta": area.n_delta,
        "n_lambda": area.n_lambda,
    })
}

#[derive(Args, Debug, Clone)]
pub struct ContourArgs {
    #[arg(long, allow_negative_numbers = true)]
    x0: f64,
    #[arg(long, allow_negative_numbers = true)]
    y0: f64,
    #[arg(long, allow_negative_numbers = true)]
    a: f64,
    #[arg(long, allow_negative_numbers = true)]
    b: f64,
    /// Samples per loop
    #[arg(long, default_value_t = 4096)]
    steps: usize,
    #[arg(long, default_value_t = 1)]
    loops: u32,
    #[arg(long)]
    clockwise: bool,
}

impl ContourArgs {
    fn contour(&self, ctx: &Context) -> Contour {
        Contour {
            steps: self.steps,
            loops: self.loops,
            direction: if self.clockwise { Direction::Clockwise } else { Direction::Anticlockwise },
            policy: ctx.policy,
            ..Contour::new(self.x0, self.y0, self.a, self.b)
        }
    }
}

#[derive(Args, Debug)]
pub struct EncircleArgs {
    #[command(flatten)]
    contour: ContourArgs,
    /// Conversion threshold on the pair gap (default: median pairwise gap)
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Serialize)]
struct EncircleSummary {
    contour: Contour,
    monodromy: MonodromyResult,
    cycle: String,
    samples: usize,
    refinements: usize,
    events: Vec<serde_json::Value>,
}

fn event_json(traj: &LoopTrajectory) -> Vec<serde_json::Value> {
    traj.events
        .iter()
        .map(|e| {
            json!({
                "theta": e.theta,
                "theta_over_pi": e.theta / PI,
                "branches": [e.branches.0, e.branches.1],
                "ranks": [e.ranks.0, e.ranks.1],
                "gap": e.gap_at_event,
            })
        })
        .collect()
}

fn encircle_summary(c: &Contour, traj: &LoopTrajectory, m: &MonodromyResult) -> EncircleSummary {
    EncircleSummary {
        contour: *c,
        monodromy: *m,
        cycle: m.permutation.cycle_notation(),
        samples: traj.samples.len(),
        refinements: traj.refinements,
        events: event_json(traj),
    }
}

pub fn encircle(ctx: &Context, a: &EncircleArgs, out: &mut OutDir) -> Result<(), CliError> {
    let c = a.contour.contour(ctx);
    let (mut traj, m) = track_loop(&ctx.cfg, &c)?;
    if let Some(t) = a.threshold {
        if !(t >= 0.0) {
            return Err(CliError::Usage("threshold must be non-negative".into()));
        }
        traj.events = detect_conversions(&traj, t);
    }
    out.write_csv("trajectory.csv", &trajectory::to_table(&traj))?;
    out.write_json("encircle.json", &encircle_summary(&c, &traj, &m))
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["trajectory", "x0"]))]
pub struct PhaseArgs {
    /// Trajectory CSV written by `encircle`
    #[arg(long, conflicts_with_all = ["x0", "y0", "a", "b"])]
    trajectory: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true, requires_all = ["y0", "a", "b"])]
    x0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    y0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    a: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    b: Option<f64>,
    #[arg(long, default_value_t = 4096)]
    steps: usize,
    #[arg(long, default_value_t = 1)]
    loops: u32,
    #[arg(long)]
    clockwise: bool,
}

fn phase_table(series: &PhaseSeries) -> Table {
    let mut t = Table::new(&[
        "theta", "phi_b1", "phi_b2", "phi_b3", "phi_r1", "phi_r2", "phi_r3", "rank1_branch", "rank2_branch", "rank3_branch",
    ]);
    for k in 0..series.theta.len() {
        let mut row = vec![num(series.theta[k])];
        row.extend(series.branch[k].iter().map(|&x| num(x)));
        row.extend(series.ordered[k].iter().map(|&x| num(x)));
        row.extend(series.rank_branch[k].iter().map(|b| (b + 1).to_string()));
        t.push(row);
    }
    t
}

fn phase_json(series: &PhaseSeries, report: &SwitchReport) -> serde_json::Value {
    json!({
        "closure": series.closure,
        "closure_mod_2pi": series.closure_mod_2pi,
        "switches": report.switches.iter().map(|s| json!({
            "theta": s.theta,
            "theta_over_pi": s.theta / PI,
            "ranks": [s.ranks.0, s.ranks.1],
            "branches": [s.branches.0, s.branches.1],
            "event_theta": s.event_theta,
        })).collect::<Vec<_>>(),
        "diagnostics": report.diagnostics,
    })
}

pub fn phase(ctx: &Context, a: &PhaseArgs, out: &mut OutDir) -> Result<(), CliError> {
    let traj = match &a.trajectory {
        Some(path) => trajectory::load(path)?,
        None => {
            let ca = ContourArgs {
                x0: a.x0.expect("required by group"),
                y0: a.y0.expect("required by x0"),
                a: a.a.expect("required by x0"),
                b: a.b.expect("required by x0"),
                steps: a.steps,
                loops: a.loops,
                clockwise: a.clockwise,
            };
            track_loop(&ctx.cfg, &ca.contour(ctx))?.0
        }
    };
    let series = accumulate_phase(&ctx.cfg, &traj)?;
    let report = detect_phase_switch(&traj, &series, &traj.events);
    out.write_csv("phase.csv", &phase_table(&series))?;
    out.write_json("phase.json", &phase_json(&series, &report))
}

/// Every figure dataset under the built-in parameters, plus a summary of
/// the headline numbers.
pub fn reproduce(ctx: &Context, out: &mut OutDir) -> Result<(), CliError> {
    const ARC_STEPS: usize = 2000;
    let mut arcs = Vec::new();
    for (fig, delta, pair) in [("fig1", 0.21, (2, 3)), ("fig1", 0.23, (2, 3)), ("fig2", 1.26, (1, 2)), ("fig2", 1.29, (1, 2))] {
        let spec = SweepSpec { policy: ctx.policy, ..SweepSpec::standard(delta, ARC_STEPS) };
        let (trace, summary) = run_sweep(ctx, &spec, &PAIRS)?;
        out.write_csv(&format!("{fig}_arc_delta_{delta}.csv"), &arc_table(&trace))?;
        let focus = summary.classes.iter().find(|c| c.pair == pair).copied();
        arcs.push(json!({ "figure": fig, "delta": delta, "pair": [pair.0, pair.1], "class": focus, "all_pairs": summary.classes }));
    }

    // fig3: a family of sweeps across both EP regions.
    let mut family = Table::new(&["delta", "lambda_re", "lambda_im", "re_e1", "im_e1", "re_e2", "im_e2", "re_e3", "im_e3"]);
    for k in 0..=32 {
        let delta = 0.05 * k as f64;
        let spec = SweepSpec { policy: ctx.policy, ..SweepSpec::standard(delta, 121) };
        let trace = sweep(&ctx.cfg, &spec)?;
        for f in &trace.frames {
            let mut row = vec![num(delta), num(f.point.lambda_re), num(f.point.lambda_im)];
            for e in f.frame.values {
                row.push(num(e.re));
                row.push(num(e.im));
            }
            family.push(row);
        }
    }
    out.write_csv("fig3_arc_family.csv", &family)?;

    let eps = locate_eps(&ctx.cfg, &ctx.policy, &ScanBox::standard())?;
    let located = |e: &LocatedEp| {
        json!({
            "delta": e.candidate.delta,
            "lambda_re": e.candidate.lambda_re,
            "lambda_im": e.candidate.lambda_im,
            "residual": e.candidate.residual,
            "ranks": [e.candidate.pair.0, e.candidate.pair.1],
            "order_exponent": e.order.exponent,
        })
    };

    let contour = |x0, y0, a, b| Contour { policy: ctx.policy, ..Contour::new(x0, y0, a, b) };
    let mut loops = serde_json::Map::new();
    for (name, c) in [("fig4_black", contour(0.5, 0.25, 1.0, 1.0)), ("fig4_violet", contour(1.25, 0.25, 0.5, 1.0))] {
        let (traj, m) = track_loop(&ctx.cfg, &c)?;
        out.write_csv(&format!("{name}.csv"), &trajectory::to_table(&traj))?;
        let squared = track_loop(&ctx.cfg, &c.with_loops(2))?.1;
        let mut s = serde_json::to_value(encircle_summary(&c, &traj, &m)).expect("serialisable");
        s["two_loops"] = json!({ "permutation": squared.permutation, "cycle": squared.permutation.cycle_notation() });
        loops.insert(name.to_string(), s);
    }

    let fig5 = contour(0.6, 0.25, 2.5, 1.0);
    let (traj5, m5) = track_loop(&ctx.cfg, &fig5)?;
    out.write_csv("fig5_trajectory.csv", &trajectory::to_table(&traj5))?;
    loops.insert("fig5".into(), serde_json::to_value(encircle_summary(&fig5, &traj5, &m5)).expect("serialisable"));

    let three = fig5.with_loops(3);
    let (traj6, _) = track_loop(&ctx.cfg, &three)?;
    out.write_csv("fig6_trajectory.csv", &trajectory::to_table(&traj6))?;
    let mut mono = Table::new(&["loops", "branch1_to", "branch2_to", "branch3_to", "cycle"]);
    let mut powers = Vec::new();
    for n in 1..=3u32 {
        let p = ep3_core::encircle::monodromy_of(&truncate(&traj6, n), n)?.permutation;
        let img = p.one_based();
        mono.push(vec![n.to_string(), img[0].to_string(), img[1].to_string(), img[2].to_string(), p.cycle_notation()]);
        powers.push(json!({ "loops": n, "permutation": p, "cycle": p.cycle_notation() }));
    }
    out.write_csv("fig6_monodromy.csv", &mono)?;

    let series = accumulate_phase(&ctx.cfg, &traj5)?;
    let report = detect_phase_switch(&traj5, &series, &traj5.events);
    out.write_csv("fig7_phase.csv", &phase_table(&series))?;
    let series3 = accumulate_phase(&ctx.cfg, &traj6)?;

    let summary = json!({
        "config": ctx.cfg,
        "lambda_im_policy": ctx.policy,
        "arc": arcs,
        "eps": eps.iter().map(located).collect::<Vec<_>>(),
        "encirclement": loops,
        "fig6_powers": powers,
        "fig7_phase": phase_json(&series, &report),
        "three_loop_phase": { "closure": series3.closure, "closure_mod_2pi": series3.closure_mod_2pi },
    });
    out.write_json("summary.json", &summary)
}

/// The leading part of a multi-loop trajectory up to the end of loop `n`.
fn truncate(traj: &LoopTrajectory, n: u32) -> LoopTrajectory {
    let sign = traj.samples.get(1).map_or(1.0, |s| s.theta.signum());
    let target = sign * 2.0 * PI * n as f64;
    let end = traj.samples.iter().position(|s| (s.theta - target).abs() < 1e-9).map_or(traj.samples.len(), |k| k + 1);
    LoopTrajectory { contour: traj.contour, samples: traj.samples[..end].to_vec(), events: Vec::new(), refinements: 0 }
}
