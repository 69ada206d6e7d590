use serde::Serialize;
use sg_sampling::blowups::{conjecture_metrics, BlowupSequence, StageMetrics, STAGE_CAP};
use sg_sampling::eigenbasis::{
    bandlimited_basis, beta_neumann_basis, gamma_basis, verify_basis, BasisReport, MemberExport,
    Provenance,
};
use sg_sampling::graphs::{
    build_beta, build_gamma, build_xi, build_zeta, dense_spectrum, laplacian,
};
use sg_sampling::sampling::{sampling_function, table1 as table1_rows};
use sg_sampling::sg3::{fit_laplacian_identity, negative_result_check, verify_xi_decimation};
use sg_sampling::sg3::{FitReport, NegativeReport, RelationReport};
use sg_sampling::{Convention, Fractal, Graph, GraphKind, Normalization, SamplingStats, Word};

use crate::config::{Format, RunConfig};
use crate::export;
use crate::{BasisKind, ConventionArg, Failure, GraphName, NormChoice};

/// Largest level for which graphs are materialized.
const GRAPH_CAP: usize = 9;
/// Largest quadrature depth below the sampling level.
const DEPTH_CAP: usize = 10;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn write(config: &RunConfig, text: &str) -> Result<(), Failure> {
    export::emit(text, config.output.as_deref()).map_err(Failure::Usage)
}

fn format_for(config: &RunConfig, default: Format, allowed: &[Format]) -> Result<Format, Failure> {
    let format = config.format.unwrap_or(default);
    if allowed.contains(&format) {
        Ok(format)
    } else {
        Err(usage(format!("this command does not produce {format}")))
    }
}

fn json<T: Serialize + ?Sized>(value: &T) -> Result<String, Failure> {
    export::json(value).map_err(Failure::Usage)
}

fn csv<T: Serialize>(rows: &[T]) -> Result<String, Failure> {
    export::csv(rows).map_err(Failure::Usage)
}

fn check_depth(depth: usize) -> Result<(), Failure> {
    if depth == 0 || depth > DEPTH_CAP {
        return Err(usage(format!("depth must be in 1..={DEPTH_CAP}")));
    }
    Ok(())
}

fn parse_word(text: &str) -> Result<Word, Failure> {
    Ok(Word::parse(Fractal::Sg, text)?)
}

fn named_graph(name: GraphName, level: usize) -> Result<std::sync::Arc<Graph>, Failure> {
    let (min, max) = match name {
        GraphName::Beta | GraphName::Gamma => {
            (if name == GraphName::Gamma { 1 } else { 0 }, GRAPH_CAP)
        }
        GraphName::Zeta | GraphName::Xi => {
            (if name == GraphName::Xi { 1 } else { 0 }, GRAPH_CAP - 3)
        }
    };
    if level < min || level > max {
        return Err(usage(format!(
            "level for {name:?} must be in {min}..={max}"
        )));
    }
    Ok(match name {
        GraphName::Beta => build_beta(level),
        GraphName::Gamma => build_gamma(level),
        GraphName::Zeta => build_zeta(level),
        GraphName::Xi => build_xi(level),
    })
}

pub fn graph(config: &RunConfig, name: GraphName, level: Option<usize>) -> Result<(), Failure> {
    let g = named_graph(name, level.unwrap_or(config.level))?;
    let text = match format_for(config, Format::Json, &[Format::Json, Format::Svg])? {
        Format::Svg => export::svg_graph(&g),
        _ => json(&g.export())?,
    };
    write(config, &text)
}

#[derive(Serialize)]
struct SpectrumRow {
    index: usize,
    eigenvalue: f64,
    multiplicity_group: usize,
}

#[derive(Serialize)]
struct SpectrumExport<'a> {
    graph: &'a str,
    level: usize,
    convention: Convention,
    values: &'a [f64],
    groups: &'a [usize],
}

pub fn spectrum(
    config: &RunConfig,
    name: GraphName,
    level: Option<usize>,
    convention: Option<ConventionArg>,
) -> Result<(), Failure> {
    let level = level.unwrap_or(config.level);
    let g = named_graph(name, level)?;
    let convention = match convention {
        Some(ConventionArg::Plain) => Convention::Plain,
        Some(ConventionArg::Neumann) => Convention::NeumannWeighted,
        None if g.kind == GraphKind::Vertex => Convention::NeumannWeighted,
        None => Convention::Plain,
    };
    let spec = dense_spectrum(&laplacian(&g, convention, false)?)?;
    let text = match format_for(config, Format::Csv, &[Format::Csv, Format::Json])? {
        Format::Json => json(&SpectrumExport {
            graph: &format!("{name:?}").to_lowercase(),
            level,
            convention,
            values: &spec.values,
            groups: &spec.groups,
        })?,
        _ => {
            let rows: Vec<SpectrumRow> = spec
                .values
                .iter()
                .zip(&spec.groups)
                .enumerate()
                .map(|(index, (&eigenvalue, &multiplicity_group))| SpectrumRow {
                    index,
                    eigenvalue,
                    multiplicity_group,
                })
                .collect();
            csv(&rows)?
        }
    };
    write(config, &text)
}

#[derive(Serialize)]
struct BasisExport {
    kind: String,
    level: usize,
    report: BasisReport,
    members: Vec<MemberExport>,
}

#[derive(Serialize)]
struct BasisRow {
    index: usize,
    eigenvalue: f64,
    provenance: Provenance,
    residual: f64,
}

pub fn basis(config: &RunConfig, kind: BasisKind, level: Option<usize>) -> Result<(), Failure> {
    let level = level.unwrap_or(config.level);
    let cap = STAGE_CAP;
    if level > cap || (kind == BasisKind::Gamma && level == 0) {
        return Err(usage(format!("basis level must be in 1..={cap}")));
    }
    let b = match kind {
        BasisKind::Gamma => gamma_basis(level)?,
        BasisKind::Beta => beta_neumann_basis(level)?,
        BasisKind::Bandlimited => bandlimited_basis(level)?,
    };
    let report = verify_basis(&b);
    let passes = match kind {
        BasisKind::Bandlimited => {
            report.rank == report.members && report.max_residual <= config.eigen_tol
        }
        _ => report.passes(config.eigen_tol, config.spectrum_tol),
    };
    let summary = format!(
        "rank {} of {}, max residual {:.3e}, spectrum error {:?}",
        report.rank, report.members, report.max_residual, report.max_spectrum_error
    );
    let text = match format_for(config, Format::Json, &[Format::Json, Format::Csv])? {
        Format::Csv => {
            let rows: Vec<BasisRow> = b
                .members
                .iter()
                .zip(&b.provenance)
                .zip(&report.residuals)
                .enumerate()
                .map(|(index, ((u, p), &residual))| BasisRow {
                    index,
                    eigenvalue: u.eigenvalue,
                    provenance: *p,
                    residual,
                })
                .collect();
            csv(&rows)?
        }
        _ => json(&BasisExport {
            kind: format!("{kind:?}").to_lowercase(),
            level,
            members: b.export(),
            report,
        })?,
    };
    write(config, &text)?;
    if passes {
        Ok(())
    } else {
        Err(Failure::Numerical(summary))
    }
}

fn compact(w: &Word) -> String {
    w.digits().iter().map(|d| d.to_string()).collect()
}

#[derive(Serialize)]
struct StatsRow {
    word: String,
    m: usize,
    norm: String,
    sup: f64,
    scaled_l2: f64,
    #[serde(rename = "quad_M")]
    quad_m: usize,
    gap: f64,
}

impl From<&SamplingStats> for StatsRow {
    fn from(s: &SamplingStats) -> Self {
        Self {
            word: compact(&s.word),
            m: s.m,
            norm: s.normalization.to_string(),
            sup: s.sup_norm,
            scaled_l2: s.scaled_l2,
            quad_m: s.quad_level,
            gap: s.gap,
        }
    }
}

fn gap_check(config: &RunConfig, stats: &[SamplingStats]) -> Result<(), Failure> {
    match stats.iter().find(|s| s.gap > config.gap_tol) {
        Some(s) => Err(Failure::Numerical(format!(
            "quadrature gap {:.3e} for {} exceeds {:.1e}; raise the quadrature level",
            s.gap, s.word, config.gap_tol
        ))),
        None => Ok(()),
    }
}

#[derive(Serialize)]
struct SampleExport<'a> {
    stats: &'a SamplingStats,
    eigenvalues: Vec<f64>,
    coefficients: &'a [f64],
}

pub fn sample(
    config: &RunConfig,
    word: &str,
    norm: Option<Normalization>,
    quad: Option<usize>,
) -> Result<(), Failure> {
    let word = parse_word(word)?;
    let m = word.level();
    if m == 0 || m > STAGE_CAP {
        return Err(usage(format!("word level must be in 1..={STAGE_CAP}")));
    }
    let quad = match quad {
        Some(q) => q,
        None => config.quad_level(m).map_err(Failure::Usage)?,
    };
    if quad < m {
        return Err(usage(format!(
            "quadrature level {quad} is below the word level {m}"
        )));
    }
    check_depth(quad - m)?;
    let norm = norm.unwrap_or(config.norm);
    let (f, stats) = sampling_function(&word, norm, Some(quad))?;
    let text = match format_for(
        config,
        Format::Json,
        &[Format::Json, Format::Csv, Format::Svg],
    )? {
        Format::Csv => csv(&[StatsRow::from(&stats)])?,
        Format::Svg => {
            let level = (m + 4).min(quad);
            let values = f.evaluate(level)?;
            export::svg_function(&build_beta(level), &values)
        }
        Format::Json => json(&SampleExport {
            stats: &stats,
            eigenvalues: f.space.basis.eigenvalues(),
            coefficients: &f.coefficients,
        })?,
    };
    write(config, &text)?;
    gap_check(config, std::slice::from_ref(&stats))
}

pub fn table1(
    config: &RunConfig,
    levels: usize,
    norm: NormChoice,
    depth: usize,
) -> Result<(), Failure> {
    if levels == 0 || levels > 4 {
        return Err(usage("levels must be in 1..=4"));
    }
    check_depth(depth)?;
    let norms: &[Normalization] = match norm {
        NormChoice::A => &[Normalization::A],
        NormChoice::B => &[Normalization::B],
        NormChoice::Both => &[Normalization::A, Normalization::B],
    };
    let mut stats = Vec::new();
    for &n in norms {
        stats.extend(table1_rows(levels, n, depth)?);
    }
    let text = match format_for(config, Format::Csv, &[Format::Csv, Format::Json])? {
        Format::Json => json(&stats)?,
        _ => csv(&stats.iter().map(StatsRow::from).collect::<Vec<_>>())?,
    };
    write(config, &text)?;
    gap_check(config, &stats)
}

#[derive(Serialize)]
struct StageRow {
    stage: usize,
    word: String,
    sup: f64,
    scaled_l2: f64,
    raw_l2: f64,
    constant_term: f64,
    measured_constant: f64,
    delta_error: f64,
    #[serde(rename = "quad_M")]
    quad_m: usize,
    gap: f64,
}

impl From<&StageMetrics> for StageRow {
    fn from(s: &StageMetrics) -> Self {
        Self {
            stage: s.stage,
            word: compact(&s.word),
            sup: s.sup,
            scaled_l2: s.scaled_l2,
            raw_l2: s.raw_l2,
            constant_term: s.constant_term,
            measured_constant: s.measured_constant,
            delta_error: s.delta_error,
            quad_m: s.quad_level,
            gap: s.gap,
        }
    }
}

pub fn blowup(
    config: &RunConfig,
    word: &str,
    seq: &str,
    stages: usize,
    norm: Option<Normalization>,
    depth: usize,
) -> Result<(), Failure> {
    let word = parse_word(word)?;
    let digits = parse_word(seq)?.digits().to_vec();
    let sequence = BlowupSequence::new(digits)?;
    check_depth(depth)?;
    let norm = norm.unwrap_or(config.norm);
    let metrics = conjecture_metrics(&word, &sequence, stages, norm, depth)?;
    let text = match format_for(config, Format::Csv, &[Format::Csv, Format::Json])? {
        Format::Json => json(&metrics)?,
        _ => csv(&metrics.iter().map(StageRow::from).collect::<Vec<_>>())?,
    };
    write(config, &text)?;
    match metrics.iter().find(|s| s.gap > config.gap_tol) {
        Some(s) => Err(Failure::Numerical(format!(
            "quadrature gap {:.3e} at stage {} exceeds {:.1e}",
            s.gap, s.stage, config.gap_tol
        ))),
        None => Ok(()),
    }
}

#[derive(Serialize)]
pub struct Sg3Reports {
    pub negative: NegativeReport,
    pub xi_decimation: RelationReport,
    pub fit: FitReport,
}

pub fn sg3_reports() -> Result<Sg3Reports, Failure> {
    Ok(Sg3Reports {
        negative: negative_result_check()?,
        xi_decimation: verify_xi_decimation()?,
        fit: fit_laplacian_identity()?,
    })
}

pub fn sg3_verify(config: &RunConfig) -> Result<(), Failure> {
    format_for(config, Format::Json, &[Format::Json])?;
    let reports = sg3_reports()?;
    write(config, &json(&reports)?)?;
    if reports.negative.pass && reports.fit.pass {
        Ok(())
    } else {
        Err(Failure::Numerical("SG₃ checks failed".into()))
    }
}
