use levelforge_core::corpus::{Provenance, Segment};
use levelforge_core::playability::{corner_cell, lr_reachability, lr_starts, AgentRules, GravityWorld, CORNER_QUERIES};
use levelforge_core::playability::{loz_playable, playability_report, Agents};
use levelforge_core::tiles::TileCatalog;
use proptest::prelude::*;

const ALPHABET: &[u8] = b"#-.BDEFGIMOPSWb";

fn segment(cells: &[usize]) -> Segment {
    let mut g = [[b'.'; 16]; 16];
    for (i, &k) in cells.iter().enumerate() {
        g[i / 16][i % 16] = ALPHABET[k];
    }
    Segment::new(g, Provenance::generated())
}

fn cells_strategy() -> impl Strategy<Value = Vec<usize>> {
    // mostly blank, so that both verdicts occur
    proptest::collection::vec(prop_oneof![3 => Just(2usize), 1 => 0usize..15], 256)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn opening_a_solid_tile_keeps_loz_playable(cells in cells_strategy(), pick in 0usize..256) {
        let before = segment(&cells);
        let rules = AgentRules::zelda();
        let solid: Vec<usize> = (0..256)
            .map(|k| (k + pick) % 256)
            .filter(|&k| rules.solid.contains(&before.get(k / 16, k % 16)))
            .collect();
        prop_assume!(!solid.is_empty());
        let k = solid[0];
        let mut after = before.clone();
        after.grid[k / 16][k % 16] = b'.';
        let corners = |s: &Segment| -> Vec<_> {
            CORNER_QUERIES.iter().flat_map(|(a, b)| [corner_cell(s, &rules, *a), corner_cell(s, &rules, *b)]).collect()
        };
        prop_assume!(corners(&before) == corners(&after));
        if loz_playable(&before) {
            prop_assert!(loz_playable(&after));
        }
    }

    #[test]
    fn platformer_rests_only_where_supported_or_blocked(cells in cells_strategy()) {
        let s = segment(&cells);
        let rules = AgentRules::lode_runner();
        let world = GravityWorld { segment: &s, rules: &rules };
        if let Some((top, bottom)) = lr_starts(&s, &rules) {
            for start in [top, bottom] {
                let reach = lr_reachability(&s, start).unwrap();
                for &(r, c) in &reach.reachable {
                    let below_open = r < 15 && rules.walkable(s.get(r + 1, c));
                    prop_assert!(world.supported((r, c), None) || !below_open, "resting at {:?}", (r, c));
                    prop_assert!(reach.visited.contains(&(r, c)));
                }
            }
        }
    }

    #[test]
    fn verdicts_are_deterministic(cells in cells_strategy()) {
        let s = segment(&cells);
        let cat = TileCatalog::default();
        let a = playability_report(std::slice::from_ref(&s), &cat, &Agents::default()).unwrap();
        let b = playability_report(&[s], &cat, &Agents::default()).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn all_blank_batch_is_fully_loz_playable() {
    let blank = Segment::filled(b'.');
    let report = playability_report(&vec![blank; 10], &TileCatalog::default(), &Agents::default()).unwrap();
    assert_eq!(report.loz_astar_pct, 100.0);
    assert_eq!(report.n, 10);
}

#[test]
fn empty_batch_is_rejected() {
    assert!(playability_report(&[], &TileCatalog::default(), &Agents::default()).is_err());
}
