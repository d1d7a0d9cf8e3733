use std::sync::Arc;

use proptest::prelude::*;

use mhdl::auxiliary::AuxState;
use mhdl::checkpoint;
use mhdl::config::parse_config;
use mhdl::gevrey::{seminorm_x, GevreyParams};
use mhdl::grid::{DomainConfig, Grid};
use mhdl::output::{fmt_f64, Manifest};
use mhdl::{Field, State};

fn small_grid(nx: usize, nz: usize) -> Arc<Grid> {
    Grid::new(DomainConfig { nx, nz, zmax: 6.0, ..DomainConfig::default() }).unwrap()
}

fn field(g: &Arc<Grid>, c: &[f64]) -> Field {
    let c = c.to_vec();
    Field::from_fn(g, move |x, _, z| {
        c.iter()
            .enumerate()
            .map(|(k, a)| a * ((k + 1) as f64 * x + k as f64).cos())
            .sum::<f64>()
            * z
            * (-z).exp()
    })
}

fn coeffs() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 1..4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn checkpoint_round_trip(
        nx in prop::sample::select(vec![8usize, 16]),
        nz in 16usize..24,
        t in 0.0f64..10.0,
        cu in coeffs(),
        cf in coeffs(),
        with_aux in any::<bool>(),
    ) {
        let g = small_grid(nx, nz);
        let s = State::new(t, vec![field(&g, &cu)], vec![field(&g, &cf)]).unwrap();
        let aux = with_aux.then(|| AuxState::initial(&s));
        let bytes = checkpoint::encode(&s, aux.as_ref()).unwrap();
        let back = checkpoint::decode(&bytes).unwrap();
        prop_assert_eq!(&back.state, &s);
        prop_assert_eq!(&back.aux, &aux);
        prop_assert_eq!(checkpoint::encode(&back.state, back.aux.as_ref()).unwrap(), bytes.clone());
        // a truncated file is rejected
        let cut = bytes.len() * 3 / 4;
        prop_assert!(checkpoint::decode(&bytes[..cut]).is_err());
    }

    #[test]
    fn config_canonical_form_is_stable(
        nx in (4usize..32).prop_map(|n| 2 * n),
        nz in 16usize..200,
        zmax in 1.0f64..40.0,
        stretch in 1.0f64..4.0,
        nu in 1e-3f64..10.0,
        mu in 1e-3f64..10.0,
        steps in 1usize..1000,
        dt in 1e-5f64..1e-2,
        rho in 0.01f64..2.0,
        sigma in 1.0001f64..1.5,
        diag in prop::sample::select(vec!["all", "none", "energy", "psi,xi_eta", "apriori, energy"]),
    ) {
        let text = format!(
            "[domain]\nnx = {nx}\nnz = {nz}\nzmax = {zmax}\nstretch = {stretch}\nnu = {nu}\nmu = {mu}\n\
             [solver]\ndt = {dt}\nt_final = {}\n[gevrey]\nrho = {rho}\nsigma = {sigma}\nbeta = 0\n\
             [output]\ndir = out/p\ndiagnostics = {diag}\n",
            dt * steps as f64
        );
        let cfg = parse_config(&text).unwrap();
        prop_assert_eq!(cfg.domain.nx, nx);
        prop_assert_eq!(cfg.domain.zmax.to_bits(), zmax.to_bits());
        prop_assert_eq!(cfg.solver.dt.to_bits(), dt.to_bits());
        prop_assert_eq!(cfg.gevrey.sigma.to_bits(), sigma.to_bits());
        let canon = cfg.to_ini();
        let again = parse_config(&canon).unwrap();
        prop_assert_eq!(again.to_ini(), canon);
        prop_assert_eq!(again.diagnostics, cfg.diagnostics);
    }

    #[test]
    fn manifest_round_trip(
        config in "[a-z =\\[\\]0-9.]{0,40}(\n[a-z =0-9.]{0,40}){0,4}",
        files in prop::collection::btree_map(
            "[a-z0-9_]{1,8}(/[a-z0-9_][a-z0-9_.]{0,7}){0,2}",
            prop::collection::vec(any::<u8>(), 0..64),
            0..8,
        ),
    ) {
        let mut m = Manifest { config: config.lines().map(|l| format!("{l}\n")).collect(), files: Vec::new() };
        for (path, content) in &files {
            m.add(path, content);
        }
        prop_assert_eq!(Manifest::parse(&m.to_text()).unwrap(), m);
    }

    #[test]
    fn floats_survive_csv(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
    }

    #[test]
    fn seminorm_monotone_and_homogeneous(
        c in coeffs(),
        rho in 0.05f64..1.5,
        drho in 0.01f64..0.5,
        sigma in 1.01f64..1.45,
        dsigma in 0.01f64..0.05,
        scale in 0.01f64..100.0,
    ) {
        let g = small_grid(16, 24);
        let a = field(&g, &c);
        let norm = |a: &Field, rho: f64, sigma: f64| {
            seminorm_x(std::slice::from_ref(a), &GevreyParams { rho, sigma, ..GevreyParams::default() })
                .unwrap()
                .log_value
        };
        let base = norm(&a, rho, sigma);
        prop_assert!(norm(&a, rho + drho, sigma) >= base);
        prop_assert!(norm(&a, rho, sigma + dsigma) <= base);
        let scaled = norm(&a.scale(scale), rho, sigma);
        prop_assert!((scaled - base - scale.ln()).abs() <= 1e-9 * base.abs().max(1.0));
    }
}
