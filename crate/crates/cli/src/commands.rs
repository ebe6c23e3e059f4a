use std::io::Write;
use std::path::Path;

use expendist::*;
use serde::Serialize;

use crate::output::{sink, write_json, Provenance};
use crate::{AgentArgs, FitArgs, Format, GiniArgs, GofArgs, KdeArgs, RatioLaw, SimulateArgs, TableArgs, TrendArgs};

/// The round label implied by a file such as `rural_2006-07.csv`.
fn label_from_path(path: &Path) -> String {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    match stem.rsplit_once('_') {
        Some((_, tail)) if survey_time(tail, TimeEncoding::Midpoint).is_ok() => tail.to_string(),
        _ => stem,
    }
}

fn load_table(
    path: &Path,
    unit: Unit,
    round: &Option<String>,
    deflators: &Option<std::path::PathBuf>,
) -> Result<GroupedSample> {
    let label = round.clone().unwrap_or_else(|| label_from_path(path));
    let sample = load_grouped_csv(path, unit)?.with_round_label(label);
    match deflators {
        Some(d) => deflate(&sample, &DeflatorSeries::load(d)?),
        None => Ok(sample),
    }
}

fn table(args: &TableArgs) -> Result<GroupedSample> {
    load_table(&args.input, args.unit, &args.round, &args.deflators)
}

fn table_inputs(args: &TableArgs) -> Vec<&Path> {
    std::iter::once(args.input.as_path())
        .chain(args.deflators.as_deref())
        .collect()
}

/// Two-column `key,value` CSV.
fn write_pairs(out: &Option<std::path::PathBuf>, rows: &[(String, String)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink(out)?);
    w.write_record(["key", "value"])?;
    for (k, v) in rows {
        w.write_record([k, v])?;
    }
    w.flush()?;
    Ok(())
}

fn spec_rows(spec: &DistributionSpec) -> Vec<(String, String)> {
    let mut rows = vec![("family".to_string(), spec.family().name().to_string())];
    rows.extend(spec.params().into_iter().map(|(k, v)| (k.to_string(), v.to_string())));
    rows
}

#[derive(Serialize)]
struct FitOutput<'a> {
    round: &'a str,
    unit: Unit,
    #[serde(flatten)]
    fit: &'a FitResult,
}

pub fn fit(a: FitArgs) -> Result<()> {
    let sample = table(&a.table)?;
    let opts = FitOptions {
        seed: a.common.seed,
        max_evals: a.max_evals,
        ..Default::default()
    };
    let fit = fit_chi2(&sample, a.family, a.table.unit, &opts)?;
    match a.common.format {
        Format::Json => write_json(
            &a.common.out,
            &FitOutput {
                round: sample.round_label(),
                unit: a.table.unit,
                fit: &fit,
            },
            Provenance::new(table_inputs(&a.table), a.common.seed)?,
        ),
        Format::Csv => {
            let mut rows = spec_rows(&fit.spec);
            rows.push(("chi2".into(), fit.chi2.to_string()));
            rows.push(("n_classes".into(), fit.n_classes.to_string()));
            rows.push(("converged".into(), fit.converged.to_string()));
            write_pairs(&a.common.out, &rows)
        }
    }
}

#[derive(Serialize)]
struct GofOutput<'a> {
    round: &'a str,
    unit: Unit,
    spec: &'a DistributionSpec,
    chi2: f64,
    ks: f64,
    test: &'a GofReport,
}

pub fn gof(a: GofArgs) -> Result<()> {
    let sample = table(&a.table)?;
    let spec = match &a.params {
        Some(path) => {
            let spec: DistributionSpec = serde_json::from_reader(std::fs::File::open(path)?)?;
            spec.validate()?;
            spec
        }
        None => {
            let opts = FitOptions {
                seed: a.common.seed,
                ..Default::default()
            };
            fit_chi2(&sample, a.family, a.table.unit, &opts)?.spec
        }
    };
    let report = mc_pvalue_sized(
        &sample,
        &spec,
        a.table.unit,
        a.statistic,
        a.replicates,
        a.mc_size,
        a.common.seed,
    )?;
    log::info!("{}", report.summary_line());
    let chi2 = chi2_at(&spec, &sample, a.table.unit)?;
    let ks = ks_grouped(&sample, &spec, a.table.unit)?;
    match a.common.format {
        Format::Json => {
            let mut inputs = table_inputs(&a.table);
            inputs.extend(a.params.as_deref());
            write_json(
                &a.common.out,
                &GofOutput {
                    round: sample.round_label(),
                    unit: a.table.unit,
                    spec: &spec,
                    chi2,
                    ks,
                    test: &report,
                },
                Provenance::new(inputs, a.common.seed)?,
            )
        }
        Format::Csv => {
            let mut rows = spec_rows(&spec);
            rows.extend([
                ("chi2".into(), chi2.to_string()),
                ("ks".into(), ks.to_string()),
                ("statistic".into(), report.statistic_name.to_string()),
                ("p_value".into(), report.p_value.to_string()),
                ("replicates".into(), report.replicates.to_string()),
            ]);
            write_pairs(&a.common.out, &rows)
        }
    }
}

#[derive(Serialize)]
struct GiniOutput {
    /// Percent, rounded to two decimals as tables report it.
    gini: f64,
    method: GiniMethod,
    #[serde(skip_serializing_if = "Option::is_none")]
    unit: Option<Unit>,
    observations: usize,
}

fn is_grouped_table(path: &Path) -> Result<bool> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    Ok(header.len() == 5 && header[0] == "lower" && header[1] == "upper")
}

/// First column of a CSV as numbers; a non-numeric first row is a header.
fn read_values(path: &Path) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut values = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let cell = rec.get(0).unwrap_or_default();
        match cell.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if i == 0 => {}
            Err(_) => {
                return Err(Error::MalformedRow {
                    line: i + 1,
                    reason: format!("{cell:?} is not a number"),
                })
            }
        }
    }
    Ok(values)
}

pub fn gini(a: GiniArgs) -> Result<()> {
    let (curve, estimate, unit, observations) = if is_grouped_table(&a.input)? {
        let sample = load_table(&a.input, a.unit, &a.round, &a.deflators)?;
        let curve = lorenz_from_grouped(&sample, a.unit)?;
        let g = gini_from_lorenz(&curve);
        (curve, g, Some(a.unit), sample.len())
    } else {
        let values = read_values(&a.input)?;
        (
            lorenz_from_values(&values)?,
            gini_pairwise(&values)?,
            None,
            values.len(),
        )
    };
    match a.common.format {
        Format::Json => {
            let inputs = std::iter::once(a.input.as_path()).chain(a.deflators.as_deref());
            write_json(
                &a.common.out,
                &GiniOutput {
                    gini: (estimate.value * 100.0).round() / 100.0,
                    method: estimate.method,
                    unit,
                    observations,
                },
                Provenance::new(inputs, a.common.seed)?,
            )
        }
        Format::Csv => curve.write_csv(sink(&a.common.out)?),
    }
}

#[derive(Serialize)]
struct KdeOutput<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    rural_share: Option<f64>,
    truncated: bool,
    #[serde(flatten)]
    curve: &'a KdeCurve,
}

fn spanning_grid(grids: &[Vec<f64>], points: usize) -> Vec<f64> {
    let a = grids.iter().map(|g| g[0]).fold(f64::INFINITY, f64::min);
    let b = grids.iter().map(|g| g[g.len() - 1]).fold(f64::NEG_INFINITY, f64::max);
    let n = points.max(2);
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

pub fn kde(a: KdeArgs) -> Result<()> {
    let unit = a.table.unit;
    let first = table(&a.table)?;
    let mut inputs = table_inputs(&a.table);
    let (curve, rural_share) = match (&a.urban, &a.weights) {
        (Some(urban_path), Some(weights_path)) => {
            let urban = load_table(urban_path, unit, &a.table.round, &a.table.deflators)?;
            let samples = [first, urban];
            let h = match a.bandwidth {
                Some(h) => h,
                None => pooled_bandwidth(&samples, unit)?,
            };
            let grids = samples
                .iter()
                .map(|s| default_grid(s, h, a.grid_points))
                .collect::<Result<Vec<_>>>()?;
            let grid = spanning_grid(&grids, a.grid_points);
            let year = match a.year {
                Some(y) => y,
                None => survey_time(samples[0].round_label(), TimeEncoding::Midpoint)?,
            };
            let (r, _) = sector_weight(&SectorWeights::load(weights_path)?, year)?;
            let rural = grouped_kde(&samples[0], unit, h, &grid, a.truncated)?;
            let urban = grouped_kde(&samples[1], unit, h, &grid, a.truncated)?;
            inputs.extend([urban_path.as_path(), weights_path.as_path()]);
            (pool_national(&rural, &urban, r)?, Some(r))
        }
        _ => {
            let h = match a.bandwidth {
                Some(h) => h,
                None => bandwidth_for(&first, unit)?,
            };
            let grid = default_grid(&first, h, a.grid_points)?;
            (grouped_kde(&first, unit, h, &grid, a.truncated)?, None)
        }
    };
    let curve = if a.level { curve.to_level() } else { curve };
    match a.common.format {
        Format::Json => write_json(
            &a.common.out,
            &KdeOutput {
                rural_share,
                truncated: a.truncated,
                curve: &curve,
            },
            Provenance::new(inputs, a.common.seed)?,
        ),
        Format::Csv => curve.write_csv(sink(&a.common.out)?),
    }
}

#[derive(Serialize)]
struct TrendRow<'a> {
    column: &'a str,
    linear: TrendResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    quadratic: Option<QuadraticTrend>,
}

#[derive(Serialize)]
struct TrendOutput<'a> {
    time_encoding: TimeEncoding,
    times: Vec<f64>,
    trends: Vec<TrendRow<'a>>,
}

pub fn trend(a: TrendArgs) -> Result<()> {
    let table = SeriesTable::load(&a.input)?;
    let times = table.times(a.time_encoding)?;
    let names: Vec<&str> = if a.columns.is_empty() {
        table.columns.iter().map(|(n, _)| n.as_str()).collect()
    } else {
        a.columns.iter().map(String::as_str).collect()
    };
    let trends = names
        .iter()
        .map(|&name| {
            let values = table
                .column(name)
                .ok_or_else(|| Error::InvalidArgument(format!("no column {name:?} in {}", a.input.display())))?;
            Ok(TrendRow {
                column: name,
                linear: linear_trend(&times, values)?,
                quadratic: if a.quadratic {
                    Some(quadratic_trend(&times, values)?)
                } else {
                    None
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    match a.common.format {
        Format::Json => write_json(
            &a.common.out,
            &TrendOutput {
                time_encoding: a.time_encoding,
                times,
                trends,
            },
            Provenance::new([a.input.as_path()], a.common.seed)?,
        ),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(sink(&a.common.out)?);
            w.write_record([
                "column",
                "intercept",
                "slope",
                "slope_std_error",
                "p_value",
                "r2",
                "f_stat",
                "ci_low",
                "ci_high",
                "error_variance",
                "n",
            ])?;
            for row in &trends {
                let t = &row.linear;
                w.write_record([
                    row.column.to_string(),
                    t.intercept.to_string(),
                    t.slope.to_string(),
                    t.slope_std_error.to_string(),
                    t.slope_p_value.to_string(),
                    t.r2.to_string(),
                    t.f_stat.to_string(),
                    t.ci95.0.to_string(),
                    t.ci95.1.to_string(),
                    t.error_variance.to_string(),
                    t.n.to_string(),
                ])?;
            }
            w.flush()?;
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct TopShare {
    fraction: f64,
    sample: f64,
    exact: f64,
}

#[derive(Serialize)]
struct SimulateOutput {
    params: MixtureParams,
    x0_calibrated: bool,
    gini: SimulationSummary,
    top_shares: Vec<TopShare>,
}

pub fn simulate(a: SimulateArgs) -> Result<()> {
    let mut params = MixtureParams {
        x_m: a.x_m,
        sigma2: a.sigma2,
        nu: a.nu,
        x0: a.x0,
        pi: a.pi,
    };
    if let Some(target) = a.calibrate_top10 {
        params.x0 = calibrate_tail_cutoff(params, 0.10, target)?;
    }
    let spec = DistributionSpec::Mixture(params);
    let seed = a.common.seed;
    if a.common.format == Format::Csv {
        let draws = spec.sample(a.n, seed)?;
        let mut w = sink(&a.common.out)?;
        writeln!(w, "x")?;
        for x in draws {
            writeln!(w, "{x}")?;
        }
        w.flush()?;
        return Ok(());
    }
    let gini = simulation_gini_repeated(&spec, a.n, a.runs, seed)?;
    let top_shares = [0.1, 0.2]
        .into_iter()
        .map(|f| {
            Ok(TopShare {
                fraction: f,
                sample: top_share(&spec, f, a.n, seed)?,
                exact: population_top_share(&spec, f)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_json(
        &a.common.out,
        &SimulateOutput {
            params,
            x0_calibrated: a.calibrate_top10.is_some(),
            gini,
            top_shares,
        },
        Provenance::new([], seed)?,
    )
}

#[derive(Serialize)]
struct AgentSummary {
    config: AgentModelConfig,
    mean: f64,
    min: f64,
    max: f64,
    log_skewness: f64,
    /// Hill tail exponents at top fractions 5%, 2% and 1%, where the tail is large enough.
    hill: Vec<(f64, Option<f64>)>,
}

pub fn agents(a: AgentArgs) -> Result<()> {
    let config = AgentModelConfig {
        n_agents: a.n,
        kappa: a.kappa,
        tau: match a.tau {
            Some(tau) => TauMode::Fixed { tau },
            None => TauMode::Geometric { mean: a.tau_mean },
        },
        ratio: match a.ratio {
            RatioLaw::Uniform => RatioDist::Uniform { upper: a.ratio_param },
            RatioLaw::Point => RatioDist::PointMass { value: a.ratio_param },
            RatioLaw::Exponential => RatioDist::Exponential { mean: a.ratio_param },
        },
        aggregation: if a.log_linear {
            Aggregation::LogLinear
        } else {
            Aggregation::Linear
        },
        seed: a.common.seed,
    };
    let c = simulate_consumption(&config)?;
    match a.common.format {
        Format::Csv => {
            let mut w = sink(&a.common.out)?;
            writeln!(w, "consumption")?;
            for x in &c {
                writeln!(w, "{x}")?;
            }
            w.flush()?;
            Ok(())
        }
        Format::Json => {
            let n = c.len() as f64;
            let logs: Vec<f64> = c.iter().map(|x| x.ln()).collect();
            let m = logs.iter().sum::<f64>() / n;
            let var = logs.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
            let third = logs.iter().map(|v| (v - m).powi(3)).sum::<f64>() / n;
            let hill = [0.05, 0.02, 0.01]
                .into_iter()
                .map(|f| (f, tail_exponent_hill(&c, f).ok()))
                .collect();
            write_json(
                &a.common.out,
                &AgentSummary {
                    config,
                    mean: c.iter().sum::<f64>() / n,
                    min: c.iter().copied().fold(f64::INFINITY, f64::min),
                    max: c.iter().copied().fold(0.0, f64::max),
                    log_skewness: if var > 0.0 { third / var.powf(1.5) } else { 0.0 },
                    hill,
                },
                Provenance::new([], a.common.seed)?,
            )
        }
    }
}
