use std::fmt::Display;
use std::fs;
use std::path::Path;

use anyhow::Context;
use mincr::bandit::{lucb_run_with, rating_arms, summarize, BanditRun, LucbConfig, SCHEDULE};
use mincr::functionals::{
    empirical_bernstein_from_moments, hoeffding_interval, kl_bernoulli_interval,
    oracle_chernoff_interval,
};
use mincr::regions::p_value;
use mincr::volume::{average_volume, uniform_prior_comparison, MIN_RESOLUTION};
use mincr::{
    covering_collection, functional_interval, ConfidenceRegion, Construction,
    EmpiricalDistribution, Error, LinearFunctional, RegionSpec, Scan, SimplexGrid, SimplexPoint,
};
use serde_json::{json, Map, Value};

use crate::args::{
    BanditArgs, Command, CoveringArgs, Format, Probs, PvalueArgs, RegionArgs, RegionMode,
    VolumeArgs, WidthsArgs,
};
use crate::output::{emit, num, Document, Table};

#[derive(Debug)]
pub enum CliError {
    /// Invalid input; nothing was computed or written.
    Usage(String),
    Compute(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Compute(e)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Compute(e.into())
    }
}

fn usage(e: impl Display) -> CliError {
    CliError::Usage(e.to_string())
}

/// Result of a command whose output was written.
#[derive(Debug, PartialEq, Eq)]
pub enum Status {
    Done,
    /// Output was written but some runs failed.
    Incomplete(String),
}

type CliResult<T> = Result<T, CliError>;

pub fn run(command: Command) -> CliResult<Status> {
    match command {
        Command::Region(args) => region(args),
        Command::Covering(args) => covering(args),
        Command::Pvalue(args) => pvalue(args),
        Command::Widths(args) => widths(args),
        Command::Volume(args) => volume(args),
        Command::Bandit(args) => bandit(args),
    }
}

fn check_delta(delta: f64) -> CliResult<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(usage(format!("--delta must lie in (0, 1), got {delta}")))
    }
}

fn observation(
    counts: &[u64],
    k: Option<usize>,
    n: Option<u64>,
) -> CliResult<EmpiricalDistribution> {
    let phat = EmpiricalDistribution::new(counts.to_vec()).map_err(usage)?;
    if let Some(k) = k.filter(|&k| k != phat.k()) {
        return Err(usage(format!(
            "--k {k} but --phat has {} categories",
            phat.k()
        )));
    }
    if let Some(n) = n.filter(|&n| n != phat.n()) {
        return Err(usage(format!(
            "--n {n} but the counts of --phat sum to {}",
            phat.n()
        )));
    }
    Ok(phat)
}

fn point(p: &Probs, k: Option<usize>) -> CliResult<SimplexPoint> {
    let point = match p {
        Probs::Uniform => {
            let k = k.ok_or_else(|| usage("--p uniform needs --k"))?;
            SimplexPoint::uniform(k).map_err(usage)?
        }
        Probs::Values(v) => SimplexPoint::new(v.clone()).map_err(usage)?,
    };
    if let Some(k) = k.filter(|&k| k != point.k()) {
        return Err(usage(format!(
            "--p has {} entries, expected {k}",
            point.k()
        )));
    }
    Ok(point)
}

fn specs(
    constructions: &[Construction],
    k: usize,
    n: u64,
    delta: f64,
) -> CliResult<Vec<RegionSpec>> {
    constructions
        .iter()
        .map(|&c| RegionSpec::new(c, k, n, delta).map_err(usage))
        .collect()
}

fn write_document(doc: &Document, format: Format, out: Option<&Path>) -> CliResult<()> {
    let bytes = doc.render(format)?;
    emit(&bytes, out)?;
    Ok(())
}

fn obj(value: Value) -> Map<String, Value> {
    match value {
        Value::Object(m) => m,
        _ => unreachable!("json! object literal"),
    }
}

fn count_columns(prefix: &str, k: usize) -> Vec<String> {
    (1..=k).map(|i| format!("{prefix}{i}")).collect()
}

fn region(args: RegionArgs) -> CliResult<Status> {
    check_delta(args.delta)?;
    let phat = observation(&args.phat.0, args.k, args.n)?;
    let k = phat.k();
    let specs = specs(&args.construction.0, k, phat.n(), args.delta)?;
    let format = args.output.format;

    if let Some(p) = &args.p {
        if args.mode.is_some() {
            return Err(usage("--mode does not apply to a single-point query (--p)"));
        }
        let p = point(p, Some(k))?;
        let mut table = Table::new(&["construction", "member"]);
        let mut entries = Vec::new();
        for spec in &specs {
            let member = ConfidenceRegion::new(&phat, spec)?.contains(&p)?;
            table.push(vec![spec.construction().to_string(), member.to_string()]);
            entries.push(json!({ "construction": spec.construction(), "member": member }));
        }
        let json = obj(json!({
            "command": "region",
            "phat": phat.counts(),
            "delta": args.delta,
            "p": p.probs(),
            "membership": entries,
        }));
        write_document(
            &Document::new(table, json),
            format,
            args.output.out.as_deref(),
        )?;
        return Ok(Status::Done);
    }

    let mode = args.mode.unwrap_or(RegionMode::Boundary);
    if mode == RegionMode::Boundary && k != 3 {
        return Err(usage(format!(
            "boundary dumps need k = 3, got k = {k}; use --mode grid"
        )));
    }
    if args.grid == 0 {
        return Err(usage("--grid must be positive"));
    }

    let mut docs = Vec::new();
    for spec in &specs {
        let region = ConfidenceRegion::new(&phat, spec)?;
        let name = spec.construction().to_string();
        let (table, points) = match mode {
            RegionMode::Boundary => {
                let mut table = Table::new(&["construction", "p1", "p2", "p3"]);
                let points = boundary(&region, args.grid)?;
                for p in &points {
                    table.push(vec![name.clone(), num(p[0]), num(p[1]), num(p[2])]);
                }
                (table, json!(points))
            }
            RegionMode::Grid => {
                let mut header = vec!["construction".to_string()];
                header.extend(count_columns("p", k));
                header.push("inside".into());
                let header: Vec<&str> = header.iter().map(String::as_str).collect();
                let mut table = Table::new(&header);
                let mut inside = Vec::new();
                for p in SimplexGrid::new(k, args.grid)?.iter() {
                    let member = region.contains(&p)?;
                    let mut row = vec![name.clone()];
                    row.extend(p.probs().iter().map(|&x| num(x)));
                    row.push(member.to_string());
                    table.push(row);
                    if member {
                        inside.push(p.probs().to_vec());
                    }
                }
                (table, json!(inside))
            }
        };
        let json = obj(json!({
            "command": "region",
            "mode": if mode == RegionMode::Boundary { "boundary" } else { "grid" },
            "construction": spec.construction(),
            "phat": phat.counts(),
            "delta": args.delta,
            "grid_resolution": args.grid,
            "points": points,
        }));
        docs.push((name, Document::new(table, json)));
    }

    match &args.output.out {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let ext = if format == Format::Csv { "csv" } else { "json" };
            for (name, doc) in &docs {
                write_document(doc, format, Some(&dir.join(format!("region-{name}.{ext}"))))?;
            }
        }
        None => {
            let mut table = Table::default();
            let mut regions = Vec::new();
            for (i, (_, doc)) in docs.into_iter().enumerate() {
                if i == 0 {
                    table = doc.table;
                } else {
                    table.extend(doc.table);
                }
                regions.push(Value::Object(doc.json));
            }
            let json = obj(json!({ "command": "region", "regions": regions }));
            write_document(&Document::new(table, json), format, None)?;
        }
    }
    Ok(Status::Done)
}

/// Member lattice points of `Δ_{3,M} / M` with a non-member (or missing)
/// neighbour, ordered by angle around their centroid.
fn boundary(region: &ConfidenceRegion, m: u64) -> CliResult<Vec<[f64; 3]>> {
    let side = m as usize + 1;
    let mut inside = vec![false; side * side];
    for a in 0..=m {
        for b in 0..=m - a {
            let p = SimplexPoint::new_normalized(vec![a as f64, b as f64, (m - a - b) as f64])?;
            inside[a as usize * side + b as usize] = region.contains(&p)?;
        }
    }
    let member = |a: i64, b: i64| {
        a >= 0 && b >= 0 && a + b <= m as i64 && inside[a as usize * side + b as usize]
    };
    let mut points = Vec::new();
    for a in 0..=m as i64 {
        for b in 0..=m as i64 - a {
            if !member(a, b) {
                continue;
            }
            let edge = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, -1), (-1, 1)]
                .iter()
                .any(|&(da, db)| !member(a + da, b + db));
            if edge {
                let m = m as f64;
                points.push([a as f64 / m, b as f64 / m, (m - (a + b) as f64) / m]);
            }
        }
    }
    // Ternary-plot coordinates for the angular ordering.
    let planar = |p: &[f64; 3]| (p[1] + 0.5 * p[2], p[2] * 3f64.sqrt() / 2.0);
    let count = points.len().max(1) as f64;
    let (cx, cy) = points
        .iter()
        .map(planar)
        .fold((0.0, 0.0), |(x, y), (px, py)| {
            (x + px / count, y + py / count)
        });
    points.sort_by(|p, q| {
        let angle = |p: &[f64; 3]| {
            let (x, y) = planar(p);
            (y - cy).atan2(x - cx)
        };
        angle(p).total_cmp(&angle(q)).then(p[0].total_cmp(&q[0]))
    });
    Ok(points)
}

fn covering(args: CoveringArgs) -> CliResult<Status> {
    check_delta(args.delta)?;
    let p = point(&args.p, args.k)?;
    let k = p.k();
    mincr::simplex::simplex_size(k, args.n).map_err(usage)?;
    let s = covering_collection(&p, args.n, args.delta)?;

    let mut header = vec!["rank".to_string()];
    header.extend(count_columns("c", k));
    header.extend(["probability".to_string(), "cumulative".to_string()]);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut table = Table::new(&header);
    let mut members = Vec::new();
    for (i, ((e, &pr), &cum)) in s
        .members()
        .iter()
        .zip(s.probabilities())
        .zip(s.cumulative())
        .enumerate()
    {
        let mut row = vec![(i + 1).to_string()];
        row.extend(e.counts().iter().map(u64::to_string));
        row.extend([num(pr), num(cum)]);
        table.push(row);
        members.push(json!({ "counts": e.counts(), "probability": pr, "cumulative": cum }));
    }
    let json = obj(json!({
        "command": "covering",
        "p": p.probs(),
        "n": args.n,
        "delta": args.delta,
        "size": s.len(),
        "total_mass": s.total_mass(),
        "members": members,
    }));
    write_document(
        &Document::new(table, json),
        args.output.format,
        args.output.out.as_deref(),
    )?;
    Ok(Status::Done)
}

fn pvalue(args: PvalueArgs) -> CliResult<Status> {
    let phat = observation(&args.phat.0, args.k, None)?;
    let p = point(&args.p, Some(phat.k()))?;
    if let Some(delta) = args.delta {
        check_delta(delta)?;
    }
    let value = p_value(&phat, &p)?;
    let mut json = obj(
        json!({ "command": "pvalue", "phat": phat.counts(), "p": p.probs(), "p_value": value }),
    );
    let table = match args.delta {
        Some(delta) => {
            let member = value > delta;
            json.insert("delta".into(), delta.into());
            json.insert("levelset_member".into(), member.into());
            let mut t = Table::new(&["p_value", "delta", "levelset_member"]);
            t.push(vec![num(value), num(delta), member.to_string()]);
            t
        }
        None => {
            let mut t = Table::new(&["p_value"]);
            t.push(vec![num(value)]);
            t
        }
    };
    write_document(
        &Document::new(table, json),
        args.output.format,
        args.output.out.as_deref(),
    )?;
    Ok(Status::Done)
}

/// Counts `(n/10, n/10, 8n/10)`, rounded when `n` is not a multiple of 10.
fn widths_pattern(n: u64) -> (Vec<u64>, bool) {
    let a = (n as f64 / 10.0).round() as u64;
    (vec![a, a, n - 2 * a], n % 10 == 0)
}

fn widths(args: WidthsArgs) -> CliResult<Status> {
    check_delta(args.delta)?;
    if args.n.is_empty() {
        return Err(usage("--n needs at least one sample size"));
    }
    if let Some(&n) = args.n.iter().find(|&&n| n < 2) {
        return Err(usage(format!("sample sizes must be at least 2, got {n}")));
    }
    if args.grid == Some(0) {
        return Err(usage("--grid must be positive"));
    }
    let f = LinearFunctional::new(vec![0.0, 0.5, 1.0]).expect("finite values");
    let truth = SimplexPoint::new(vec![0.1, 0.1, 0.8]).expect("valid pmf");
    let sigma2 = f.variance_under(&truth)?;
    let range = f.range();

    let mut table = Table::new(&["n", "method", "lower", "upper", "width", "note"]);
    let mut rows = Vec::new();
    for &n in &args.n {
        let (counts, exact) = widths_pattern(n);
        if !exact {
            let note = format!("n = {n} is not a multiple of 10; using counts {counts:?}");
            table.push(vec![
                n.to_string(),
                "warning".into(),
                String::new(),
                String::new(),
                String::new(),
                note.clone(),
            ]);
            rows.push(json!({ "n": n, "method": "warning", "note": note }));
        }
        let phat = EmpiricalDistribution::new(counts)?;
        let mean = f.empirical_mean(&phat)?;
        let scan = args
            .grid
            .map_or(Scan::default_for(3, n), |resolution| Scan::Grid {
                resolution,
            });
        let spec = RegionSpec::new(Construction::LevelSet, 3, n, args.delta)?;
        let level = functional_interval(&phat, &f, &spec, scan)?;
        let results = [
            (
                level.clone(),
                format!("{scan}, padding {}", level.conservative_padding),
            ),
            (
                hoeffding_interval(mean, n, args.delta, range)?,
                String::new(),
            ),
            (
                oracle_chernoff_interval(mean, sigma2, n, args.delta, range)?,
                format!("variance {sigma2}"),
            ),
            (
                empirical_bernstein_from_moments(
                    mean,
                    f.sample_variance(&phat)?,
                    n,
                    args.delta,
                    range,
                )?,
                String::new(),
            ),
            (kl_bernoulli_interval(mean, n, args.delta)?, String::new()),
        ];
        for (r, note) in results {
            table.push(vec![
                n.to_string(),
                r.method.to_string(),
                num(r.lower),
                num(r.upper),
                num(r.width()),
                note.clone(),
            ]);
            rows.push(json!({
                "n": n,
                "method": r.method.to_string(),
                "lower": r.lower,
                "upper": r.upper,
                "width": r.width(),
                "note": note,
            }));
        }
    }
    let json = obj(json!({
        "command": "widths",
        "delta": args.delta,
        "values": f.values(),
        "rows": rows,
    }));
    write_document(
        &Document::new(table, json),
        args.output.format,
        args.output.out.as_deref(),
    )?;
    Ok(Status::Done)
}

fn volume(args: VolumeArgs) -> CliResult<Status> {
    check_delta(args.delta)?;
    if args.grid < MIN_RESOLUTION {
        return Err(usage(format!("--grid must be at least {MIN_RESOLUTION}")));
    }
    if args.draws.is_some() && args.seed.is_none() {
        return Err(usage("--draws needs an explicit --seed"));
    }
    if args.draws == Some(0) || args.draws == Some(1) {
        return Err(usage("--draws must be at least 2"));
    }
    mincr::simplex::simplex_size(args.k, args.n).map_err(usage)?;
    let specs = specs(&args.construction.0, args.k, args.n, args.delta)?;

    let mut header = vec!["construction".to_string(), "row".to_string()];
    header.extend(count_columns("c", args.k));
    header.extend(["volume".to_string(), "standard_error".to_string()]);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut table = Table::new(&header);
    let blank = vec![String::new(); args.k];

    let mut reports = Vec::new();
    for spec in &specs {
        let report = average_volume(spec, args.grid)?;
        let name = report.construction.to_string();
        for e in &report.per_phat {
            let mut row = vec![name.clone(), "phat".into()];
            row.extend(e.phat.counts().iter().map(u64::to_string));
            row.extend([num(e.volume), String::new()]);
            table.push(row);
        }
        let mut row = vec![name, "total".into()];
        row.extend(blank.clone());
        row.extend([num(report.total), String::new()]);
        table.push(row);
        reports.push(report);
    }
    let mut json = obj(json!({ "command": "volume", "reports": reports }));

    if let (Some(draws), Some(seed)) = (args.draws, args.seed) {
        let cmp = uniform_prior_comparison(args.k, args.n, args.delta, args.grid, draws, seed)?;
        for (c, mean) in &cmp.mean_volume {
            let mut row = vec![c.to_string(), "prior-mean".into()];
            row.extend(blank.clone());
            row.extend([num(*mean), String::new()]);
            table.push(row);
        }
        for d in &cmp.paired {
            let mut row = vec![d.baseline.to_string(), "excess-over-levelset".into()];
            row.extend(blank.clone());
            row.extend([num(d.mean_difference), num(d.standard_error)]);
            table.push(row);
        }
        json.insert(
            "uniform_prior".into(),
            serde_json::to_value(&cmp).context("serializing")?,
        );
    }
    write_document(
        &Document::new(table, json),
        args.output.format,
        args.output.out.as_deref(),
    )?;
    Ok(Status::Done)
}

fn bandit(args: BanditArgs) -> CliResult<Status> {
    check_delta(args.delta)?;
    if args.trials == 0 {
        return Err(usage("--trials must be at least 1"));
    }
    if !(args.tolerance >= 0.0) {
        return Err(usage("--tolerance must be nonnegative"));
    }
    if args.methods.is_empty() {
        return Err(usage("--methods needs at least one method"));
    }
    let arms = rating_arms();
    let mut table = Table::new(&[
        "row",
        "trial",
        "method",
        "seed",
        "stopping_time",
        "identified_arm",
        "per_arm_counts",
        "status",
        "lower_quartile",
        "median",
        "upper_quartile",
    ]);
    let mut runs_json = Vec::new();
    let mut summaries_json = Vec::new();
    let mut capped = 0;
    let join = |c: &[u64]| c.iter().map(u64::to_string).collect::<Vec<_>>().join(" ");

    for &method in &args.methods {
        let mut times = Vec::new();
        for trial in 0..args.trials {
            let seed = args.seed.wrapping_add(trial);
            let mut config = LucbConfig::new(args.delta, args.tolerance, method, seed);
            config.max_samples = args.max_samples;
            let (row_tail, run_json) = match lucb_run_with(&arms, &config) {
                Ok(BanditRun {
                    stopping_time,
                    identified_arm,
                    per_arm_counts,
                    ..
                }) => {
                    times.push(stopping_time);
                    (
                        vec![
                            stopping_time.to_string(),
                            (identified_arm + 1).to_string(),
                            join(&per_arm_counts),
                            "ok".into(),
                        ],
                        json!({
                            "stopping_time": stopping_time,
                            "identified_arm": identified_arm + 1,
                            "per_arm_counts": per_arm_counts,
                            "status": "ok",
                        }),
                    )
                }
                Err(Error::SampleCapExceeded { per_arm_counts, .. }) => {
                    capped += 1;
                    let total: u64 = per_arm_counts.iter().sum();
                    (
                        vec![
                            total.to_string(),
                            String::new(),
                            join(&per_arm_counts),
                            "cap-exceeded".into(),
                        ],
                        json!({
                            "stopping_time": total,
                            "identified_arm": null,
                            "per_arm_counts": per_arm_counts,
                            "status": "cap-exceeded",
                        }),
                    )
                }
                Err(e) => return Err(e.into()),
            };
            let mut row = vec![
                "run".into(),
                (trial + 1).to_string(),
                method.to_string(),
                seed.to_string(),
            ];
            row.extend(row_tail);
            row.extend([String::new(), String::new(), String::new()]);
            table.push(row);
            let mut run_json = obj(run_json);
            run_json.insert("trial".into(), (trial + 1).into());
            run_json.insert("method".into(), method.name().into());
            run_json.insert("seed".into(), seed.into());
            runs_json.push(Value::Object(run_json));
        }
        let mut row = vec![
            "summary".into(),
            String::new(),
            method.to_string(),
            String::new(),
        ];
        row.extend([String::new(), String::new(), String::new()]);
        match summarize(&times) {
            Some(s) => {
                row.extend([
                    format!("{} runs", s.runs),
                    num(s.lower_quartile),
                    num(s.median),
                    num(s.upper_quartile),
                ]);
                summaries_json.push(json!({ "method": method.name(), "summary": s }));
            }
            None => {
                row.extend([
                    "no completed runs".into(),
                    String::new(),
                    String::new(),
                    String::new(),
                ]);
                summaries_json.push(json!({ "method": method.name(), "summary": null }));
            }
        }
        table.push(row);
    }
    let json = obj(json!({
        "command": "bandit",
        "delta": args.delta,
        "tolerance": args.tolerance,
        "schedule": SCHEDULE,
        "max_samples": args.max_samples,
        "arm_means": arms.iter().map(|a| a.mean()).collect::<Vec<_>>(),
        "runs": runs_json,
        "summaries": summaries_json,
    }));
    write_document(
        &Document::new(table, json),
        args.output.format,
        args.output.out.as_deref(),
    )?;
    if capped > 0 {
        Ok(Status::Incomplete(format!(
            "{capped} run(s) hit the {}-sample cap",
            args.max_samples
        )))
    } else {
        Ok(Status::Done)
    }
}
