//! Semantic preservation of rewriting under random context: plant a rule's
//! left side next to a random diagram, dress the boundary with identity
//! spiders so the cut lands inside the graph, then apply whatever match the
//! engine finds and demand the contracted tensor never moves.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use zhff::diagram::random_diagram;
use zhff::{apply_at, equal_diagrams, find_matches, instantiate, rule_grid, simplify, Diagram, FieldSpec};

fn dress(host: &Diagram, field: &FieldSpec) -> Diagram {
    let mut wrap_in = Diagram::empty(field);
    for _ in 0..host.n_inputs() {
        wrap_in = wrap_in.tensor(&Diagram::z_spider(field, 1, 1)).unwrap();
    }
    let mut wrap_out = Diagram::empty(field);
    for _ in 0..host.n_outputs() {
        wrap_out = wrap_out.tensor(&Diagram::z_spider(field, 1, 1)).unwrap();
    }
    wrap_in.then(host).unwrap().then(&wrap_out).unwrap()
}

#[test]
fn two_hundred_random_rewrites_preserve_semantics_per_field() {
    for q in [2u64, 3, 4] {
        let field = FieldSpec::of_order(q).unwrap();
        let grid = rule_grid(&field, 2);
        let applied: Vec<Result<(), String>> = (0..200u64)
            .into_par_iter()
            .map(|trial| {
                let mut rng = ChaCha8Rng::seed_from_u64(q * 10_000 + trial);
                let (rule, params) = &grid[rng.gen_range(0..grid.len())];
                let instance = instantiate(*rule, &field, params)
                    .map_err(|e| format!("instantiate {rule}: {e}"))?;
                let context = random_diagram(&field, &mut rng);
                let host = dress(
                    &instance.lhs.tensor(&context).map_err(|e| e.to_string())?,
                    &field,
                );
                let matches = find_matches(&host, &instance);
                if matches.is_empty() {
                    return Err(format!(
                        "planted {rule} [{}] was not found (trial {trial})",
                        instance.detail
                    ));
                }
                let pick = &matches[rng.gen_range(0..matches.len())];
                let rewritten =
                    apply_at(&host, &instance, pick).map_err(|e| e.to_string())?;
                rewritten.validate().map_err(|e| e.to_string())?;
                if !equal_diagrams(&host, &rewritten).map_err(|e| e.to_string())? {
                    return Err(format!(
                        "{rule} [{}] changed the tensor (trial {trial})",
                        instance.detail
                    ));
                }
                // every tenth trial also pushes the result to a normal form
                if trial % 10 == 0 {
                    let settled = simplify(&rewritten);
                    if !equal_diagrams(&host, &settled).map_err(|e| e.to_string())? {
                        return Err(format!("simplify drifted after {rule} (trial {trial})"));
                    }
                }
                Ok(())
            })
            .collect();
        let failures: Vec<&String> = applied.iter().filter_map(|r| r.as_ref().err()).collect();
        assert!(
            failures.is_empty(),
            "q={q}: {} of 200 rewrites failed, first: {}",
            failures.len(),
            failures[0]
        );
    }
}
