//! Seeded synthetic venture corpora for fixtures, demos and tests.

use std::collections::BTreeSet;

use rand::Rng;

use crate::schema::{BusinessModel, Cardinality, Taxonomy};
use crate::seed;

/// Characteristics that raise the odds of a Series A label in [`ventures`].
pub const SUCCESS_DRIVERS: [(&str, &str, f64); 4] = [
    ("Interaction Intensity", "Highly Engaged", 1.6),
    ("Revenue Model", "Subscription", 1.4),
    ("Customer", "B2B", 1.0),
    ("Solution Type", "Control Tool", 0.8),
];

fn random_model(t: &Taxonomy, id: String, rng: &mut impl Rng) -> BusinessModel {
    let mut m = BusinessModel::new(id);
    for dim in t.dimensions() {
        let n = dim.characteristics.len();
        let chosen: BTreeSet<String> = match dim.cardinality {
            Cardinality::Single => BTreeSet::from([dim.characteristics[rng.random_range(0..n)].clone()]),
            Cardinality::Multi => {
                let mut set: BTreeSet<String> = dim
                    .characteristics
                    .iter()
                    .filter(|_| rng.random_bool(0.3))
                    .cloned()
                    .collect();
                if set.is_empty() {
                    set.insert(dim.characteristics[rng.random_range(0..n)].clone());
                }
                set
            }
        };
        m.choices.insert(dim.name.clone(), chosen);
    }
    let offer = m.choices["Solution Type"].iter().next().cloned().unwrap_or_default();
    let markets: Vec<&str> = m.choices["Application Ecosystem"].iter().map(String::as_str).collect();
    m.free_text.insert(
        "Solution Type".into(),
        format!("{} platform for {} customers", offer, markets.join(" and ")),
    );
    m
}

/// `n` random valid ventures whose Series A label follows a noisy logistic
/// rule over [`SUCCESS_DRIVERS`].
pub fn ventures(t: &Taxonomy, n: usize, seed_value: u64) -> Vec<BusinessModel> {
    let mut rng = seed::rng(seed_value);
    (0..n)
        .map(|i| {
            let mut m = random_model(t, format!("v{:04}", i + 1), &mut rng);
            let mut logit = -1.6;
            for (dim, ch, w) in SUCCESS_DRIVERS {
                if m.choices.get(dim).is_some_and(|s| s.contains(ch)) {
                    logit += w;
                }
            }
            let p = 1.0 / (1.0 + (-logit as f64).exp());
            m.series_a = Some(rng.random_bool(p));
            m
        })
        .collect()
}

/// Ventures labelled successful exactly when they sell subscriptions.
pub fn separable_ventures(t: &Taxonomy, n: usize, seed_value: u64) -> Vec<BusinessModel> {
    let mut rng = seed::rng(seed_value);
    (0..n)
        .map(|i| {
            let mut m = random_model(t, format!("s{:04}", i + 1), &mut rng);
            // Alternate so both classes are always present.
            let revenue = if i % 2 == 0 { ["Subscription", "Licensing"] } else { ["One-Time", "Licensing"] };
            let keep_second = rng.random_bool(0.5);
            let set: BTreeSet<String> = revenue
                .iter()
                .enumerate()
                .filter(|(j, _)| *j == 0 || keep_second)
                .map(|(_, s)| s.to_string())
                .collect();
            m.series_a = Some(set.contains("Subscription"));
            m.choices.insert("Revenue Model".into(), set);
            m
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::validate_model;

    #[test]
    fn generated_models_are_valid_and_seeded() {
        let t = Taxonomy::iot();
        let a = ventures(&t, 30, 4);
        assert!(a.iter().all(|m| validate_model(&t, m).is_valid()));
        assert_eq!(a, ventures(&t, 30, 4));
        assert!(a.iter().any(|m| m.series_a == Some(true)));
        assert!(a.iter().any(|m| m.series_a == Some(false)));
        let s = separable_ventures(&t, 10, 1);
        assert!(s.iter().all(|m| validate_model(&t, m).is_valid()));
    }
}
