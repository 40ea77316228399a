//! Tape gradients of the training objectives against central differences.

mod common;

use std::time::Instant;

use common::{max_fd_error, micro_setup, random_unit_matrix};
use gem_core::disgraph::{gcn_forward, DisGraph, GraphLearner};
use gem_core::numcore::{ParameterSet, Rng, Tape};
use gem_core::vae::{discriminator_objective, objective};

const TOL: f64 = 1e-3;

#[test]
fn micro_model_fits_the_budget() {
    let s = micro_setup(1);
    let total = s.model.scalar_count() + s.state.learner.params.scalar_count();
    assert!(total <= 5000, "{total} parameters");
}

#[test]
fn every_term_is_active() {
    let s = micro_setup(2);
    let mut tape = Tape::new();
    let o = objective(&mut tape, &s.model, &s.state, &s.x, &s.eps, &s.cfg).unwrap();
    for (name, v) in [("reconstruction", o.reconstruction), ("kl", o.kl), ("adv", o.adv)] {
        assert!(tape.value(v).get(0, 0).abs() > 1e-6, "{name} is zero");
    }
    let fit = o.graph_fit.expect("graph-fit term");
    assert!(tape.value(fit).get(0, 0) > 0.0);
}

#[test]
fn objective_gradients_match_finite_differences() {
    let start = Instant::now();
    let s = micro_setup(3);
    let mut tape = Tape::new();
    let o = objective(&mut tape, &s.model, &s.state, &s.x, &s.eps, &s.cfg).unwrap();
    tape.backward(o.objective).unwrap();

    let (e, at) = max_fd_error(
        &s.model.encoder,
        &|name| tape.grad(o.enc.var(name)),
        &|p: &ParameterSet| {
            let mut m = s.model.clone();
            m.encoder = p.clone();
            s.objective_value(&m, &s.state)
        },
    );
    assert!(e <= TOL, "encoder: {e} at {at}");

    let (e, at) = max_fd_error(
        &s.model.decoder,
        &|name| tape.grad(o.dec.var(name)),
        &|p: &ParameterSet| {
            let mut m = s.model.clone();
            m.decoder = p.clone();
            s.objective_value(&m, &s.state)
        },
    );
    assert!(e <= TOL, "decoder: {e} at {at}");

    let gcn = o.gcn.as_ref().expect("graph learner is bound");
    let (e, at) = max_fd_error(
        &s.state.learner.params,
        &|name| tape.grad(gcn.var(name)),
        &|p: &ParameterSet| {
            let mut st = s.state.clone();
            st.learner.params = p.clone();
            s.objective_value(&s.model, &st)
        },
    );
    assert!(e <= TOL, "graph learner: {e} at {at}");
    assert!(start.elapsed().as_secs() < 30);
}

#[test]
fn discriminator_gradients_match_finite_differences() {
    let s = micro_setup(4);
    let z = Rng::new(9).normal_matrix(s.x.rows(), 6);
    let perm = vec![2, 0, 3, 1];
    let (mut tape, bound, loss) = discriminator_objective(&s.model, &s.x, &z, &perm).unwrap();
    tape.backward(loss).unwrap();
    let (e, at) = max_fd_error(
        &s.model.discriminator,
        &|name| tape.grad(bound.var(name)),
        &|p: &ParameterSet| {
            let mut m = s.model.clone();
            m.discriminator = p.clone();
            let (t, _, l) = discriminator_objective(&m, &s.x, &z, &perm).unwrap();
            t.value(l).get(0, 0)
        },
    );
    assert!(e <= TOL, "discriminator: {e} at {at}");
}

#[test]
fn gcn_forward_gradients_match_finite_differences() {
    let mut rng = Rng::new(5);
    let n = 6;
    let mut prior = random_unit_matrix(n, n, &mut rng);
    for i in 0..n {
        prior.set(i, i, 0.0);
    }
    let graph = DisGraph::from_prior(common::names(n), prior).unwrap();
    let learner = GraphLearner::new(n, 3, &mut rng).unwrap();
    let weights = rng.normal_matrix(n, n);
    let t0 = graph.prior().clone();
    let scalar = |l: &GraphLearner| -> f64 {
        let t = gcn_forward(l, &graph, &t0).unwrap();
        t.hadamard(&weights).unwrap().sum()
    };

    let mut tape = Tape::new();
    let b = learner.params.bind(&mut tape, true);
    let norm = tape.constant(gem_core::disgraph::augment_normalize(graph.prior()).unwrap());
    let t0v = tape.constant(t0.clone());
    let t = learner.forward(&mut tape, &b, norm, t0v).unwrap();
    let w = tape.constant(weights.clone());
    let prod = tape.mul(t, w).unwrap();
    let s = tape.sum(prod).unwrap();
    assert!((tape.value(s).get(0, 0) - scalar(&learner)).abs() < 1e-12);
    tape.backward(s).unwrap();

    let (e, at) = max_fd_error(
        &learner.params,
        &|name| tape.grad(b.var(name)),
        &|p: &ParameterSet| {
            let mut l = learner.clone();
            l.params = p.clone();
            scalar(&l)
        },
    );
    assert!(e <= TOL, "gcn_forward: {e} at {at}");
}
