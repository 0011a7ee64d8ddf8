mod common;

use std::collections::BTreeMap;

use bmguide_core::assign::*;
use proptest::prelude::*;
use rand::Rng;

const VOCAB: [&str; 16] = [
    "solar", "battery", "grid", "retail", "logistics", "fleet", "sensor", "health", "clinic", "farm", "soil",
    "water", "factory", "robot", "payment", "insurance",
];

fn random_text(g: &mut impl Rng, words: usize) -> String {
    (0..words).map(|_| VOCAB[g.random_range(0..VOCAB.len())]).collect::<Vec<_>>().join(" ")
}

#[test]
fn planted_best_match_ranked_first() {
    for seed in 0..50u64 {
        let mut g = common::rng(seed);
        let item_text = "solar battery grid solar";
        let item = Item::from_text("venture", item_text, Vec::<String>::new());
        let mut profiles = Vec::new();
        let mut planted = AdaptiveProfile::new("planted", Vec::<String>::new(), 1.0);
        planted.dynamic = extract_topics(item_text);
        profiles.push(planted);
        while profiles.len() < 9 {
            let mut p = AdaptiveProfile::new(&format!("p{}", profiles.len()), Vec::<String>::new(), 1.0);
            p.dynamic = extract_topics(&random_text(&mut g, 6));
            if item.signature.cosine(&p.dynamic) <= 0.3 {
                profiles.push(p);
            }
        }
        let at = g.random_range(0..profiles.len());
        profiles.swap(0, at);
        let params = AssignParams { m: 5, seed, ..AssignParams::default() };
        let a = assign(&item, &profiles, &BTreeMap::new(), &params).unwrap();
        assert_eq!(a.ranked[0].evaluator_id, "planted", "seed {seed}");
        assert!((a.ranked[0].score - 0.5).abs() < 1e-12);
    }
}

fn texts() -> impl Strategy<Value = Vec<(String, f64)>> {
    prop::collection::vec(
        (prop::collection::vec(prop::sample::select(VOCAB.to_vec()), 0..8).prop_map(|w| w.join(" ")), 0.0f64..=1.0),
        1..10,
    )
}

proptest! {
    #[test]
    fn replay_reproduces_dynamic(contribs in texts(), decay in 0.0f64..=1.0) {
        let mut p = AdaptiveProfile::new("e", ["market"], decay);
        for (i, (text, q)) in contribs.iter().enumerate() {
            p = update_profile(&p, text, *q, i as u64).unwrap();
            let total: f64 = p.dynamic.weights.values().sum();
            prop_assert!(p.dynamic.is_empty() || (total - 1.0).abs() < 1e-9);
        }
        prop_assert_eq!(replay(&p), p.dynamic.clone());
    }

    #[test]
    fn match_bounded_and_symmetric(a in texts(), b in texts(), alpha in 0.0f64..=1.0) {
        let sa = extract_topics(&a[0].0);
        let sb = extract_topics(&b[0].0);
        prop_assert!((sa.cosine(&sb) - sb.cosine(&sa)).abs() < 1e-12);
        let mut p = AdaptiveProfile::new("e", ["finance"], 1.0);
        p.dynamic = sb;
        let item = Item { item_id: "i".into(), signature: sa, required_tags: ["finance".into(), "market".into()].into() };
        let s = match_score(&item, &p, alpha);
        prop_assert!((0.0..=1.0).contains(&s));
    }

    #[test]
    fn ranking_is_descending(profile_texts in prop::collection::vec(texts(), 5..12), seed in 0u64..100) {
        let profiles: Vec<AdaptiveProfile> = profile_texts
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let mut p = AdaptiveProfile::new(&format!("e{i}"), if i % 2 == 0 { vec!["market"] } else { vec![] }, 1.0);
                p.dynamic = extract_topics(&t[0].0);
                p
            })
            .collect();
        let item = Item::from_text("v", "solar grid retail", ["market"]);
        let a = assign(&item, &profiles, &BTreeMap::new(), &AssignParams { m: 5, seed, ..AssignParams::default() }).unwrap();
        prop_assert!(a.ranked.windows(2).all(|w| w[0].score >= w[1].score));
        let mut chosen = a.chosen.clone();
        chosen.sort();
        chosen.dedup();
        prop_assert_eq!(chosen.len(), 5);
    }
}
