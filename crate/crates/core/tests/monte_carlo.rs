use pbgnet::aggregate::{
    aggregate_forward_exact, aggregate_forward_sampled, psi_plus, sample_hidden,
};
use pbgnet::gradients::{grad_exact, grad_sampled};
use pbgnet::oracle::{OracleEstimate, Welford};
use pbgnet::{NetworkArchitecture, Params, RngStream};

fn net(widths: Vec<usize>, seed: u64) -> (Params, Vec<f64>) {
    let arch = NetworkArchitecture::new(widths).unwrap();
    let p = Params::gaussian(&arch, 1.0, &mut RngStream::new(seed, 21));
    let x = RngStream::new(seed, 22).gaussian_vec(arch.input_dim());
    (p, x)
}

fn sampled_outputs(p: &Params, x: &[f64], t: usize, reps: usize, seed: u64) -> OracleEstimate {
    let mut rng = RngStream::new(seed, 23);
    OracleEstimate::from_samples((0..reps).map(|_| {
        aggregate_forward_sampled(p, x, t, &mut rng)
            .unwrap()
            .output()
    }))
}

#[test]
fn sampled_forward_is_unbiased_for_one_hidden_layer() {
    for seed in 0..5 {
        let (p, x) = net(vec![3, 4, 1], seed);
        let exact = aggregate_forward_exact(&p, &x).unwrap().output();
        let est = sampled_outputs(&p, &x, 4, 20_000, seed);
        assert!(est.contains(exact, 3.5), "seed {seed}: {exact} vs {est:?}");
    }
}

#[test]
fn variance_falls_like_one_over_t() {
    let (p, x) = net(vec![3, 5, 1], 7);
    let small = sampled_outputs(&p, &x, 10, 2000, 1);
    let large = sampled_outputs(&p, &x, 1000, 2000, 2);
    let var = |e: &OracleEstimate| e.std_error * e.std_error * e.draws as f64;
    let slope = (var(&large) / var(&small)).log10() / 2.0;
    assert!((slope + 1.0).abs() < 0.15, "log-log slope {slope}");
}

#[test]
fn sampled_gradient_is_unbiased() {
    let (p, x) = net(vec![2, 3, 1], 3);
    let fwd = aggregate_forward_exact(&p, &x).unwrap();
    let exact = grad_exact(&p, &x, &fwd).unwrap().flatten();
    let mut accs = vec![Welford::default(); exact.len()];
    let mut rng = RngStream::new(4, 24);
    for _ in 0..20_000 {
        let f = aggregate_forward_sampled(&p, &x, 5, &mut rng).unwrap();
        for (a, v) in accs
            .iter_mut()
            .zip(grad_sampled(&p, &x, &f).unwrap().flatten())
        {
            a.push(v);
        }
    }
    for (a, e) in accs.iter().zip(&exact) {
        let est = a.finish();
        assert!(est.contains(*e, 4.0), "{e} vs {est:?}");
    }
}

#[test]
fn sign_frequencies_follow_psi() {
    let g = [-0.9, -0.3, 0.0, 0.5, 0.99];
    let t = 200_000;
    let draws = sample_hidden(&g, t, &mut RngStream::new(5, 25));
    for (i, &gi) in g.iter().enumerate() {
        let p: f64 = psi_plus(gi);
        let hits = (0..t).filter(|&k| draws.sign(k, i) > 0).count() as f64;
        let se = (p * (1.0 - p) / t as f64).sqrt();
        assert!(
            (hits / t as f64 - p).abs() <= 4.0 * se,
            "neuron {i}: {} vs {p}",
            hits / t as f64
        );
    }
    let grouped: u32 = draws.groups().iter().map(|&(_, c)| c).sum();
    assert_eq!(grouped as usize, t);
}
