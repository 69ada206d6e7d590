//! Invariant suite behind `sgsample selftest`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sg_sampling::blowups::{conjecture_metrics, BlowupSequence};
use sg_sampling::decimation::{eigenvalue_down, eigenvalue_up, Branch, Target};
use sg_sampling::eigenbasis::{gamma_basis, verify_basis};
use sg_sampling::geometry::{orbit_representatives, D3};
use sg_sampling::graphs::{build_beta, build_gamma, dense_spectrum, laplacian};
use sg_sampling::sampling::{table1, SamplingSpace};
use sg_sampling::sg3::Verdict;
use sg_sampling::{Convention, Normalization, Word};

use crate::commands::sg3_reports;
use crate::config::RunConfig;
use crate::Failure;

type Check = Result<(bool, String), Failure>;

fn graph_sizes() -> Check {
    for m in 0..=6usize {
        let beta = build_beta(m);
        let want = (3usize.pow(m as u32 + 1) + 3) / 2;
        if beta.num_vertices() != want || beta.num_cells() != 3usize.pow(m as u32) {
            return Ok((
                false,
                format!("beta_{m} has {} vertices", beta.num_vertices()),
            ));
        }
        if m >= 1 {
            let gamma = build_gamma(m);
            let edges = 3 * (3usize.pow(m as u32) - 1) / 2;
            if gamma.num_vertices() != 3usize.pow(m as u32) || gamma.num_edges() != edges {
                return Ok((false, format!("gamma_{m} has {} edges", gamma.num_edges())));
            }
        }
    }
    Ok((true, "beta_0..6, gamma_1..6".into()))
}

fn gamma_bases(config: &RunConfig) -> Check {
    let mut worst = 0.0f64;
    for m in 1..=4 {
        let report = verify_basis(&gamma_basis(m)?);
        if !report.passes(config.eigen_tol, config.spectrum_tol) {
            return Ok((
                false,
                format!("gamma_{m}: rank {} of {}", report.rank, report.members),
            ));
        }
        worst = worst.max(report.max_residual);
    }
    Ok((true, format!("m = 1..4, max residual {worst:.2e}")))
}

fn beta_spectra(config: &RunConfig) -> Check {
    for m in 1..=4usize {
        let beta = dense_spectrum(&laplacian(
            &build_beta(m),
            Convention::NeumannWeighted,
            false,
        )?)?;
        let gamma = dense_spectrum(&laplacian(&build_gamma(m), Convention::Plain, false)?)?;
        let sixes = beta.count_near(6.0, 1e-6);
        if sixes != (3usize.pow(m as u32) + 3) / 2 {
            return Ok((
                false,
                format!("beta_{m}: eigenvalue 6 has multiplicity {sixes}"),
            ));
        }
        let rest: Vec<f64> = beta
            .values
            .iter()
            .copied()
            .filter(|v| (v - 6.0).abs() > 1e-6)
            .collect();
        let err = rest
            .iter()
            .zip(&gamma.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        if rest.len() != gamma.len() || err > config.spectrum_tol {
            return Ok((false, format!("beta_{m} vs gamma_{m}: error {err:.2e}")));
        }
    }
    Ok((
        true,
        "multiplicity of 6 and the remaining spectrum, m = 1..4".into(),
    ))
}

fn decimation_round_trip(rng: &mut ChaCha8Rng) -> Check {
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let lambda = rng.gen_range(0.0..6.25);
        for branch in [Branch::Minus, Branch::Plus] {
            let Ok(next) = eigenvalue_up(lambda, branch, Target::Gamma) else {
                continue;
            };
            worst = worst.max((eigenvalue_down(next) - lambda).abs());
        }
    }
    Ok((worst < 1e-12, format!("max error {worst:.2e}")))
}

fn sampling_round_trip(rng: &mut ChaCha8Rng) -> Check {
    let mut worst = 0.0f64;
    for m in 1..=3 {
        let space = SamplingSpace::get(m)?;
        for norm in [Normalization::A, Normalization::B] {
            let targets: Vec<f64> = (0..space.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let f = space.reconstruct(&targets, norm, m + 6)?;
            let back = f.averages(norm, m + 6)?;
            for (a, b) in back.iter().zip(&targets) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    Ok((worst < 1e-9, format!("max average error {worst:.2e}")))
}

fn table_invariants(config: &RunConfig) -> Check {
    let rows = table1(3, Normalization::B, 8)?;
    for s in &rows {
        // The cell average is 1, so Cauchy-Schwarz forces both norms to be >= 1.
        if s.sup_norm < 1.0 || s.scaled_l2 < 1.0 - 1e-12 || s.gap > config.gap_tol {
            return Ok((
                false,
                format!(
                    "{}: sup {} l2 {} gap {:.2e}",
                    s.word, s.sup_norm, s.scaled_l2, s.gap
                ),
            ));
        }
    }
    Ok((true, format!("{} orbit rows, m = 1..3", rows.len())))
}

fn symmetry_invariance() -> Check {
    let space = SamplingSpace::get(2)?;
    let mut worst = 0.0f64;
    for w in orbit_representatives(2) {
        let images: Vec<Word> = D3.iter().map(|p| w.permuted(p)).collect();
        let stats = space.sampling_functions(&images, Normalization::B, 8)?;
        let (s0, l0) = (stats[0].1.sup_norm, stats[0].1.scaled_l2);
        for (_, s) in &stats {
            worst = worst
                .max((s.sup_norm - s0).abs())
                .max((s.scaled_l2 - l0).abs());
        }
    }
    Ok((worst < 1e-9, format!("max deviation {worst:.2e}")))
}

fn blowup_stages() -> Check {
    let seq = BlowupSequence::alternating(0, 1, 3)?;
    let metrics = conjecture_metrics(&Word::sg(&[0])?, &seq, 3, Normalization::B, 6)?;
    let ok = metrics
        .iter()
        .all(|s| s.delta_error < 1e-9 && (s.measured_constant - s.constant_term).abs() < 1e-9);
    let sups: Vec<String> = metrics.iter().map(|s| format!("{:.4}", s.sup)).collect();
    Ok((ok, format!("sup by stage [{}]", sups.join(", "))))
}

pub fn run(config: &RunConfig) -> Result<(), Failure> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut failures = 0;
    let mut report = |name: &str, check: Check| -> Result<(), Failure> {
        let (ok, detail) = check?;
        println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failures += 1;
        }
        Ok(())
    };
    report("graph sizes", graph_sizes())?;
    report("gamma eigenbases", gamma_bases(config))?;
    report("beta spectra", beta_spectra(config))?;
    report("decimation round trip", decimation_round_trip(&mut rng))?;
    report("sampling round trip", sampling_round_trip(&mut rng))?;
    report("sampling norms", table_invariants(config))?;
    report("symmetry invariance", symmetry_invariance())?;
    report("blowup stages", blowup_stages())?;

    let sg3 = sg3_reports()?;
    report(
        "sg3 averaged images",
        Ok((
            sg3.negative.pass,
            format!("{} images", sg3.negative.images.len()),
        )),
    )?;
    report(
        "sg3 laplacian fit",
        Ok((
            sg3.fit.pass,
            format!("{} candidate classes", sg3.fit.classes.len()),
        )),
    )?;
    let xi = &sg3.xi_decimation;
    println!(
        "INFO xi decimation: {} ({} surviving, {} born, {} offending)",
        if xi.verdict == Verdict::Pass {
            "PASS"
        } else {
            "FAIL"
        },
        xi.surviving,
        xi.born,
        xi.offending.len()
    );

    if failures == 0 {
        Ok(())
    } else {
        Err(Failure::Numerical(format!(
            "{failures} selftest checks failed"
        )))
    }
}
