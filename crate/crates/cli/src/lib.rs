//! Scenario runner behind the `aobkit` binary.
//!
//! A scenario names a symbol, a frequency list and a list of analyses. Each analysis writes
//! one report (CSV or JSON) into the output directory, and `summary.json` collects the scalar
//! results of the whole run.

pub mod error;
pub mod scenario;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use aobkit_core::aos::TailBoundsReport;
use aobkit_core::carleson::CarlesonMeasure;
use aobkit_core::exponentials::prop41_check;
use aobkit_core::kernels::{FrequencyPoint, KernelFamily, KERNEL_CONVENTION};
use aobkit_core::projection::{division_report, DivisorPair, ProjectionReport};
use aobkit_core::stability::{StabilityOptions, StabilityReport, WeightParams};
use aobkit_core::SchurFunction;
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

pub use error::CliError;
pub use scenario::{Analysis, Scenario};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Structured,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub format: Format,
    pub seed: Option<u64>,
    pub parallel: bool,
}

/// Files and summary entry produced by one analysis, not yet written.
#[derive(Debug)]
struct Output {
    files: Vec<(String, Vec<u8>)>,
    summary: Value,
}

fn header() -> String {
    format!("# aobkit {VERSION}; kernel-convention={KERNEL_CONVENTION}\n")
}

fn csv_file<F>(name: &str, write: F) -> aobkit_core::Result<(String, Vec<u8>)>
where
    F: FnOnce(&mut Vec<u8>) -> aobkit_core::Result<()>,
{
    let mut buf = header().into_bytes();
    write(&mut buf)?;
    Ok((format!("{name}.csv"), buf))
}

fn json_file<T: Serialize>(name: &str, body: &T) -> (String, Vec<u8>) {
    let doc = json!({ "version": VERSION, "convention": KERNEL_CONVENTION, "report": body });
    let mut text = serde_json::to_string_pretty(&doc).expect("reports serialize");
    text.push('\n');
    (format!("{name}.json"), text.into_bytes())
}

/// JSON has no infinity; such values are written as the string "inf".
fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x > 0.0 {
        json!("inf")
    } else if x < 0.0 {
        json!("-inf")
    } else {
        json!("nan")
    }
}

struct Context<'a> {
    symbol: Option<SchurFunction>,
    frequencies: &'a [Complex64],
    format: Format,
}

impl Context<'_> {
    fn symbol(&self) -> &SchurFunction {
        self.symbol.as_ref().expect("validated: symbol present")
    }

    fn points(&self, zs: &[Complex64]) -> aobkit_core::Result<Vec<FrequencyPoint>> {
        zs.iter().map(|z| FrequencyPoint::at(self.symbol(), *z)).collect()
    }

    fn run(&self, analysis: &Analysis) -> aobkit_core::Result<Output> {
        let structured = self.format == Format::Structured;
        match analysis {
            Analysis::GramTails { n_max } => {
                let family = KernelFamily::new(self.symbol().clone(), self.points(self.frequencies)?)?;
                let gram = family.gram_normalized()?;
                let n_max = n_max.unwrap_or(gram.size());
                let tails = TailBoundsReport::compute(&gram.entries, 1..=n_max)?;
                let files = if structured {
                    let entries: Vec<Vec<[f64; 2]>> = gram
                        .entries
                        .row_iter()
                        .map(|r| r.iter().map(|v| [v.re, v.im]).collect())
                        .collect();
                    vec![
                        json_file("gram", &json!({ "metadata": gram.metadata(), "entries": entries })),
                        json_file("tails", &tails),
                    ]
                } else {
                    vec![csv_file("gram", |b| gram.write_csv(b))?, csv_file("tails", |b| tails.write_csv(b))?]
                };
                Ok(Output {
                    files,
                    summary: json!({
                        "size": gram.size(),
                        "symbol_hash": gram.symbol_hash,
                        "max_offdiag": num(gram.max_offdiag()),
                        "min_eigenvalue": num(gram.min_eigenvalue()),
                        "interlacing_violations": tails.interlacing_violations(),
                    }),
                })
            }
            Analysis::Prop41 { a } => {
                let report = prop41_check(self.frequencies, *a)?;
                let file = if structured { json_file("prop41", &report) } else { csv_file("prop41", |b| report.write_csv(b))? };
                Ok(Output {
                    files: vec![file],
                    summary: json!({
                        "a": num(report.a),
                        "sup_im": num(report.sup_im),
                        "min_ratio": num(report.min_ratio),
                        "tail_ratio": num(report.tail_ratio),
                        "bounded_imaginary_parts": report.bounded_imaginary_parts,
                        "lacunary": report.lacunary,
                        "hypotheses_hold": report.hypotheses_hold(),
                        "fit_constant": num(report.fit_constant),
                        "fit_residual": num(report.fit_residual),
                    }),
                })
            }
            Analysis::Stability(spec) => {
                let b = self.symbol();
                let mus = spec.mu.expand(self.frequencies);
                let lambdas = self.points(self.frequencies)?;
                let pairs: Vec<_> = lambdas.into_iter().zip(self.points(&mus)?).collect();
                let eps = spec.eps.expand(self.frequencies.len());
                let opts = StabilityOptions { params: WeightParams::new(spec.p)?, gamma: spec.gamma, parallel: false };
                let report = StabilityReport::compute(b, &pairs, &eps, opts)?;
                let cls = match &spec.cls {
                    Some(c) => Some(b.sublevel_connected(c.delta, c.grid)?.connected),
                    None => None,
                };
                let file =
                    if structured { json_file("stability", &report) } else { csv_file("stability", |w| report.write_csv(w))? };
                let count = |f: &dyn Fn(&aobkit_core::stability::StabilityRow) -> Option<bool>| {
                    report.rows.iter().filter(|r| f(r) == Some(false)).count()
                };
                Ok(Output {
                    files: vec![file],
                    summary: json!({
                        "rows": report.rows.len(),
                        "eps_tail_first": report.eps_tail.first().copied().map(num),
                        "cor36_failures": count(&|r| r.cor36),
                        "thm310_eq2_failures": count(&|r| r.thm310_eq2),
                        "cor312_failures": count(&|r| r.cor312),
                        "cls_connected": cls,
                    }),
                })
            }
            Analysis::Carleson { measure } => {
                let measure = match measure {
                    Some(m) => m.clone(),
                    None => CarlesonMeasure::new(self.frequencies.iter().map(|z| (*z, z.im)).collect(), Vec::new())?,
                };
                let constant = measure.carleson_constant();
                let file = if structured {
                    json_file("carleson", &json!({ "measure": measure, "carleson_constant": num(constant) }))
                } else {
                    let mut buf = header().into_bytes();
                    buf.extend_from_slice(b"atoms,segments,carleson_constant\n");
                    buf.extend_from_slice(
                        format!("{},{},{:.17e}\n", measure.atoms().len(), measure.segments().len(), constant).as_bytes(),
                    );
                    ("carleson.csv".to_string(), buf)
                };
                Ok(Output {
                    files: vec![file],
                    summary: json!({
                        "atoms": measure.atoms().len(),
                        "segments": measure.segments().len(),
                        "carleson_constant": num(constant),
                    }),
                })
            }
            Analysis::Projection(spec) => {
                let pair = DivisorPair::new(spec.b2.clone(), spec.b.clone());
                let report = ProjectionReport::compute(&pair, self.frequencies)?;
                let division = division_report(&pair, self.frequencies, spec.tau)?;
                let file = if structured {
                    json_file("projection", &json!({ "projection": report, "division": division }))
                } else {
                    csv_file("projection", |w| report.write_csv(w))?
                };
                Ok(Output {
                    files: vec![file],
                    summary: json!({
                        "l1_defect": num(report.ratio.l1_defect),
                        "decreasing_increments": report.ratio.decreasing_increments,
                        "tau": num(division.tau),
                        "p_estimate": division.p_estimate,
                        "cor54_infinity_flag": report.cor54.as_ref().map(|c| c.infinity_flag),
                        "cor54_total": report.cor54.as_ref().and_then(|c| c.partial_sums.last().copied()).map(num),
                    }),
                })
            }
        }
    }
}

/// Runs every analysis of a validated scenario and writes the reports and `summary.json`.
///
/// On failure `error.json` is written next to whatever reports completed before the failing analysis.
pub fn run_scenario(scenario: &Scenario, out: &Path, opts: RunOptions) -> Result<Value, CliError> {
    fs::create_dir_all(out)?;
    let stale = out.join("error.json");
    if stale.exists() {
        fs::remove_file(stale)?;
    }
    let result = execute(scenario, out, opts);
    if let Err(e) = &result {
        write_error(out, e)?;
    }
    result
}

fn execute(scenario: &Scenario, out: &Path, opts: RunOptions) -> Result<Value, CliError> {
    scenario.validate()?;
    let frequencies = scenario.frequencies.expand();
    let ctx = Context { symbol: scenario.symbol(), frequencies: &frequencies, format: opts.format };
    let outputs: Vec<aobkit_core::Result<Output>> = if opts.parallel && scenario.analyses.len() > 1 {
        std::thread::scope(|s| {
            let handles: Vec<_> = scenario.analyses.iter().map(|a| s.spawn(|| ctx.run(a))).collect();
            handles.into_iter().map(|h| h.join().expect("analysis thread panicked")).collect()
        })
    } else {
        let mut v = Vec::new();
        for a in &scenario.analyses {
            let r = ctx.run(a);
            let failed = r.is_err();
            v.push(r);
            if failed {
                break;
            }
        }
        v
    };

    let mut analyses = Vec::new();
    for (i, (analysis, output)) in scenario.analyses.iter().zip(outputs).enumerate() {
        let output = output.map_err(|e| CliError::Analysis { analysis: format!("{i}:{}", analysis.name()), message: e.to_string() })?;
        let mut names = Vec::new();
        for (name, bytes) in output.files {
            let name = if scenario.analyses.iter().filter(|a| a.stem() == analysis.stem()).count() > 1 {
                format!("{i}-{name}")
            } else {
                name
            };
            fs::write(out.join(&name), bytes)?;
            names.push(name);
        }
        analyses.push(json!({ "name": analysis.name(), "files": names, "results": output.summary }));
    }

    let mut summary = BTreeMap::new();
    summary.insert("version", json!(VERSION));
    summary.insert("convention", json!(KERNEL_CONVENTION));
    summary.insert("seed", json!(opts.seed.unwrap_or(scenario.seed)));
    summary.insert("frequency_count", json!(frequencies.len()));
    summary.insert("scenario", json!(scenario.name));
    summary.insert("analyses", Value::Array(analyses));
    let summary = serde_json::to_value(summary).expect("summary serializes");
    let mut text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    text.push('\n');
    fs::write(out.join("summary.json"), text)?;
    Ok(summary)
}

pub fn write_error(out: &Path, e: &CliError) -> Result<(), CliError> {
    fs::create_dir_all(out)?;
    let mut text = serde_json::to_string_pretty(&e.record()).expect("error record serializes");
    text.push('\n');
    fs::write(out.join("error.json"), text)?;
    Ok(())
}
