mod common;

use common::{actor_coordinates, actor_gradcheck, critic_gradcheck, rel_err};

#[test]
fn actor_gradients_match_central_differences() {
    let (params, states) = actor_gradcheck(10, 7);
    assert_eq!(params.draws, 10);
    assert!(params.max_rel_err < 1e-4, "{params:?}");
    assert!(states.max_rel_err < 1e-4, "{states:?}");
}

#[test]
fn critic_gradients_match_central_differences() {
    let (params, actions) = critic_gradcheck(10, 7);
    assert_eq!(params.draws, 10);
    assert!(params.max_rel_err < 1e-4, "{params:?}");
    assert!(actions.max_rel_err < 1e-4, "{actions:?}");
}

#[test]
fn single_actor_coordinates() {
    // Small individual gradients lose digits to rounding in the difference,
    // so only coordinates with a usable magnitude are held to the tolerance.
    let coords = actor_coordinates(40, 3);
    let checked: Vec<_> = coords.iter().filter(|c| c.2.abs() > 1e-4).collect();
    assert!(checked.len() >= 10, "only {} usable coordinates", checked.len());
    for (t, i, a, n) in checked {
        assert!(rel_err(*a, *n) < 1e-4, "tensor {t} index {i}: {a} vs {n}");
    }
}

#[test]
fn several_seeds_agree() {
    for seed in [1u64, 2, 3, 11] {
        let (ap, ai) = actor_gradcheck(10, seed);
        let (cp, ca) = critic_gradcheck(10, seed);
        for g in [ap, ai, cp, ca] {
            assert!(g.max_rel_err < 1e-4, "seed {seed}: {g:?}");
            assert!(g.redrawn <= 2, "seed {seed}: {g:?}");
        }
    }
}
