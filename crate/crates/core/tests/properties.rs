use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use sg_sampling::decimation::{
    average_down_values, continue_eigenvalue, eigenvalue_down, eigenvalue_up, extend_gamma,
};
use sg_sampling::geometry::{cell_corners, ifs_apply, D3};
use sg_sampling::graphs::{build_beta, build_gamma, dense_spectrum, laplacian};
use sg_sampling::sampling::SamplingSpace;
use sg_sampling::{
    Branch, BranchPolicy, Convention, EigenFunction, Fractal, Normalization, Point2, Target, Word,
};

fn sg_word(max_len: usize) -> impl Strategy<Value = Word> {
    prop::collection::vec(0u8..3, 0..=max_len).prop_map(|d| Word::sg(&d).unwrap())
}

fn point() -> impl Strategy<Value = Point2> {
    (0.0..1.0f64, 0.0..1.0f64).prop_map(|(x, y)| Point2::new(x, y))
}

fn branch() -> impl Strategy<Value = Branch> {
    prop_oneof![Just(Branch::Minus), Just(Branch::Plus)]
}

proptest! {
    #[test]
    fn contraction_scales_distances(w in sg_word(8), p in point(), q in point()) {
        let scale = 0.5f64.powi(w.level() as i32);
        let d = ifs_apply(&w, p).dist(ifs_apply(&w, q));
        prop_assert!((d - scale * p.dist(q)).abs() <= 1e-12);
    }

    #[test]
    fn sg3_contraction_scales_distances(d in prop::collection::vec(0u8..6, 0..6), p in point(), q in point()) {
        let w = Word::new(Fractal::Sg3, d).unwrap();
        let scale = (1.0f64 / 3.0).powi(w.level() as i32);
        let dist = ifs_apply(&w, p).dist(ifs_apply(&w, q));
        prop_assert!((dist - scale * p.dist(q)).abs() <= 1e-12);
    }

    #[test]
    fn children_sit_inside_parents(w in sg_word(7), j in 0u8..3) {
        let child = w.child(j).unwrap();
        let corners = cell_corners(&child);
        prop_assert!(corners[j as usize].dist(cell_corners(&w)[j as usize]) <= 1e-12);
        prop_assert_eq!(child.parent().unwrap(), w);
    }

    #[test]
    fn word_text_and_index_round_trip(w in sg_word(9)) {
        prop_assert_eq!(Word::parse(Fractal::Sg, &w.to_string()).unwrap(), w.clone());
        prop_assert_eq!(Word::from_index(Fractal::Sg, w.level(), w.index()), w);
    }

    #[test]
    fn symmetries_compose_to_groups(w in sg_word(6), a in 0usize..6) {
        let image = w.permuted(&D3[a]);
        prop_assert_eq!(image.level(), w.level());
        let inverse = D3.iter().find(|p| (0..3).all(|i| p[D3[a][i] as usize] == i as u8)).unwrap();
        prop_assert_eq!(image.permuted(inverse), w);
    }

    #[test]
    fn decimation_down_inverts_up(lambda in 0.0..=6.25f64, b in branch()) {
        if let Ok(next) = eigenvalue_up(lambda, b, Target::Gamma) {
            prop_assert!((eigenvalue_down(next) - lambda).abs() <= 1e-12);
        }
    }

    #[test]
    fn forbidden_values_never_appear(lambda in 0.0..=6.25f64, b in branch()) {
        for target in [Target::Gamma, Target::Beta] {
            if let Ok(next) = eigenvalue_up(lambda, b, target) {
                prop_assert!(target.forbidden().iter().all(|f| (next - f).abs() > 1e-9));
            }
        }
    }

    #[test]
    fn minus_branch_lineages_contract(lambda in 0.01..6.0f64) {
        let lineage = continue_eigenvalue(lambda, 1, 10, &BranchPolicy::AllMinus, Target::Gamma).unwrap();
        let r = lineage.renormalized();
        let d: Vec<f64> = r.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        prop_assert!(d[d.len() - 1] <= d[3] * 0.3f64.powi(d.len() as i32 - 4));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn extension_preserves_averages(m in 1usize..4, k in 0usize..81, b in branch()) {
        let g = build_gamma(m);
        let spectrum = dense_spectrum(&laplacian(&g, Convention::Plain, false).unwrap()).unwrap();
        let k = k % spectrum.len();
        let lambda = spectrum.values[k];
        let u = EigenFunction::new(g.clone(), spectrum.vector(k), lambda).unwrap();
        if let Ok(next) = eigenvalue_up(lambda, b, Target::Gamma) {
            if let Ok(fine) = extend_gamma(&u, next) {
                prop_assert!(fine.residual() <= 1e-9);
                let back = average_down_values(&fine.graph, &fine.values).unwrap();
                for (x, y) in back.iter().zip(&u.values) {
                    prop_assert!((x - y).abs() <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn reconstruction_is_linear(m in 1usize..4, seed in prop::collection::vec(-1.0..1.0f64, 27), s in -3.0..3.0f64) {
        let space = SamplingSpace::get(m).unwrap();
        let n = space.dim();
        let a: Vec<f64> = seed[..n].to_vec();
        let b: Vec<f64> = seed.iter().rev().take(n).copied().collect();
        let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + s * y).collect();
        let quad = m + 6;
        let fa = space.reconstruct(&a, Normalization::B, quad).unwrap();
        let fb = space.reconstruct(&b, Normalization::B, quad).unwrap();
        let fm = space.reconstruct(&mix, Normalization::B, quad).unwrap();
        for ((x, y), z) in fa.coefficients.iter().zip(&fb.coefficients).zip(&fm.coefficients) {
            prop_assert!((x + s * y - z).abs() <= 1e-9);
        }
    }
}

#[test]
fn laplacian_traces_match_degree_sums() {
    for m in 1..=4 {
        for g in [build_gamma(m), build_beta(m)] {
            let spectrum =
                dense_spectrum(&laplacian(&g, Convention::Plain, false).unwrap()).unwrap();
            let degrees: usize = (0..g.num_vertices()).map(|v| g.degree(v)).sum();
            assert_abs_diff_eq!(
                spectrum.values.iter().sum::<f64>(),
                degrees as f64,
                epsilon = 1e-9
            );
        }
    }
}

#[test]
fn weighted_trace_counts_half_mass_corners() {
    // tr(M^{-1} L) = Σ deg(v) / M(v), with M = 1/2 at the three corners.
    for m in 1..=4 {
        let g = build_beta(m);
        let op = laplacian(&g, Convention::NeumannWeighted, false).unwrap();
        let mass = op.mass();
        let want: f64 = (0..g.num_vertices())
            .map(|v| g.degree(v) as f64 / mass[v])
            .sum();
        let spectrum = dense_spectrum(&op).unwrap();
        assert_abs_diff_eq!(spectrum.values.iter().sum::<f64>(), want, epsilon = 1e-8);
    }
}
