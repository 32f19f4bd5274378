use std::fmt::Write as _;
use std::path::Path;

use crate::seeds::derive_seed;
use crate::Result;

use super::config::RunConfig;
use super::evaluate::evaluate_methods;
use super::train::train_on;

/// Which axis a sweep varies.
#[derive(Debug, Clone)]
pub enum SweepAxis {
    Ncp(Vec<f64>),
    Capacity(Vec<f64>),
    ActionsExponent(Vec<u32>),
}

impl SweepAxis {
    fn name(&self) -> &'static str {
        match self {
            SweepAxis::Ncp(_) => "ncp",
            SweepAxis::Capacity(_) => "capacity",
            SweepAxis::ActionsExponent(_) => "actions_exponent",
        }
    }

    fn values(&self) -> Vec<f64> {
        match self {
            SweepAxis::Ncp(v) => v.clone(),
            SweepAxis::Capacity(v) => v.clone(),
            SweepAxis::ActionsExponent(v) => v.iter().map(|&x| x as f64).collect(),
        }
    }

    fn is_empty(&self) -> bool {
        self.values().is_empty()
    }
}

/// One long-format result row: a (setting, repetition, method) cell. On a
/// failed setting the metrics are absent and `status` carries the error.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub setting: String,
    pub value: f64,
    pub seed_index: usize,
    pub method: String,
    pub winkler: Option<f64>,
    pub width: Option<f64>,
    pub acd: Option<f64>,
    pub monetary: Option<f64>,
    pub monetary_da: Option<f64>,
    pub monetary_rt: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
}

/// Train + evaluate once per (setting value, repetition) with derived
/// sub-seeds. A failed setting is recorded as an error row, not a fatal
/// error. Results land in `<out_dir>/sweep.csv`.
pub fn sweep(base: &RunConfig, axis: &SweepAxis) -> Result<SweepOutput> {
    let output = sweep_in_memory(base, axis)?;
    let out_dir = base.resolved_out_dir();
    std::fs::create_dir_all(&out_dir)?;
    write_sweep_csv(&out_dir, &output)?;
    Ok(output)
}

/// The sweep loop without file I/O.
pub fn sweep_in_memory(base: &RunConfig, axis: &SweepAxis) -> Result<SweepOutput> {
    if axis.is_empty() {
        return Err(crate::Error::InvalidArgument("sweep value list is empty".into()));
    }
    let mut rows = Vec::new();
    for value in axis.values() {
        for rep in 0..base.n_seeds {
            let mut config = base.clone();
            config.seed = derive_seed(base.seed, &format!("sweep:{}={value}:rep{rep}", axis.name()));
            match axis {
                SweepAxis::Ncp(_) => config.ncp = value,
                SweepAxis::Capacity(_) => {
                    config.capacity_override = Some(value);
                    config.vpp.wind_capacity = value;
                }
                SweepAxis::ActionsExponent(_) => config.actions_exponent = value as u32,
            }

            let result = run_setting(&config);
            match result {
                Ok(reports) => {
                    for (method, r) in reports {
                        rows.push(SweepRow {
                            setting: axis.name().into(),
                            value,
                            seed_index: rep,
                            method,
                            winkler: Some(r.0),
                            width: Some(r.1),
                            acd: Some(r.2),
                            monetary: Some(r.3),
                            monetary_da: Some(r.4),
                            monetary_rt: Some(r.5),
                            status: "ok".into(),
                        });
                    }
                }
                Err(err) => rows.push(SweepRow {
                    setting: axis.name().into(),
                    value,
                    seed_index: rep,
                    method: "-".into(),
                    winkler: None,
                    width: None,
                    acd: None,
                    monetary: None,
                    monetary_da: None,
                    monetary_rt: None,
                    status: format!("error: {err}"),
                }),
            }
        }
    }
    Ok(SweepOutput { rows })
}

type MethodMetrics = (f64, f64, f64, f64, f64, f64);

fn run_setting(config: &RunConfig) -> Result<Vec<(String, MethodMetrics)>> {
    config.validate()?;
    let dataset = config.load_dataset()?;
    let (train_data, test_data) = dataset.split(config.train_fraction)?;
    let (artifacts, _log) = train_on(config, &train_data)?;
    let eval = evaluate_methods(config, &artifacts, &train_data, &test_data)?;
    Ok(eval
        .reports
        .into_iter()
        .map(|m| {
            let r = &m.report;
            (
                m.method,
                (r.winkler_avg, r.width_avg, r.acd, r.monetary_avg, r.monetary_da_avg, r.monetary_rt_avg),
            )
        })
        .collect())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_sweep_csv(dir: &Path, output: &SweepOutput) -> Result<()> {
    let mut text =
        String::from("setting,value,seed,method,winkler,width,acd,monetary,monetary_da,monetary_rt,status\n");
    for row in &output.rows {
        writeln!(
            text,
            "{},{},{},{},{},{},{},{},{},{},{}",
            row.setting,
            row.value,
            row.seed_index,
            row.method,
            fmt_opt(row.winkler),
            fmt_opt(row.width),
            fmt_opt(row.acd),
            fmt_opt(row.monetary),
            fmt_opt(row.monetary_da),
            fmt_opt(row.monetary_rt),
            row.status
        )
        .expect("string write");
    }
    std::fs::write(dir.join("sweep.csv"), text)?;
    Ok(())
}
