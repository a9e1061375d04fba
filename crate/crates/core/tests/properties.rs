//! Property tests for the algebraic contracts: clipping, EMA geometry,
//! anti-monotone support, hinge gradients, and rule corruption.

use proptest::prelude::*;
use rijepa_core::opt::{clip_grad_norm, ema_update};
use rijepa_core::rulemine::{corrupt_rule, fp_growth, Item, RuleStats, RuleTuple, Transaction};
use rijepa_core::tape::Tape;
use rijepa_core::tensor::Tensor;

proptest! {
    #[test]
    fn clipped_gradients_never_exceed_the_cap(
        values in proptest::collection::vec(-50.0f64..50.0, 1..40),
        max_norm in 0.1f64..10.0,
    ) {
        let mut p = Tensor::row_vector(&vec![0.0; values.len()]);
        p.set_grad(values.clone());
        let before = clip_grad_norm(&mut [&mut p], max_norm);
        let after: f64 = p.grad().unwrap().iter().map(|g| g * g).sum::<f64>().sqrt();
        prop_assert!(after <= max_norm + 1e-9 || before <= max_norm);
        if before <= max_norm {
            // below the cap the gradients are untouched
            prop_assert_eq!(p.grad().unwrap(), &values[..]);
        } else {
            // direction is preserved
            let scale = after / before;
            for (g, v) in p.grad().unwrap().iter().zip(&values) {
                prop_assert!((g - v * scale).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn ema_contracts_geometrically_toward_a_constant_source(
        start in -10.0f64..10.0,
        source in -10.0f64..10.0,
        tau in 0.05f64..0.95,
    ) {
        prop_assume!((start - source).abs() > 1e-6);
        let mut t = Tensor::row_vector(&[start]);
        let s = Tensor::row_vector(&[source]);
        let mut gap = start - source;
        for _ in 0..12 {
            ema_update(&mut [&mut t], &[&s], tau);
            let new_gap = t.get(0, 0) - source;
            prop_assert!((new_gap - tau * gap).abs() < 1e-9 * gap.abs().max(1.0));
            gap = new_gap;
        }
    }

    #[test]
    fn frequent_itemsets_are_downward_closed(
        raw in proptest::collection::vec(
            proptest::collection::vec(0u32..10, 1..6),
            1..60,
        ),
        min_support in 0.05f64..0.6,
    ) {
        let transactions: Vec<Transaction> =
            raw.into_iter().map(Transaction::new).collect();
        let sets = fp_growth(&transactions, min_support, None).unwrap();
        let by_items: std::collections::BTreeMap<&[u32], u64> =
            sets.iter().map(|s| (s.items.as_slice(), s.count)).collect();
        for s in &sets {
            for drop in 0..s.items.len() {
                if s.items.len() < 2 {
                    continue;
                }
                let mut sub = s.items.clone();
                sub.remove(drop);
                let sub_count = by_items.get(sub.as_slice());
                prop_assert!(sub_count.is_some(), "missing subset {:?}", sub);
                prop_assert!(*sub_count.unwrap() >= s.count);
            }
        }
    }

    #[test]
    fn hinge_gradient_is_zero_exactly_when_inactive(
        energies in proptest::collection::vec(0.0f64..12.0, 1..20),
        margin in 0.5f64..6.0,
    ) {
        let mut tape = Tape::new();
        let e = tape.leaf(&Tensor::row_vector(&energies));
        let h = tape.hinge(e, margin);
        let loss = tape.sum_all(h);
        tape.backward(loss).unwrap();
        let grads = tape.grad(e).unwrap();
        for (g, v) in grads.iter().zip(&energies) {
            if margin - v > 0.0 {
                prop_assert_eq!(*g, -1.0);
            } else {
                prop_assert_eq!(*g, 0.0);
            }
        }
    }

    #[test]
    fn corruption_is_an_involution_that_never_fixes_a_rule(
        n_items in 1usize..5,
        high in proptest::bool::ANY,
    ) {
        let items: Vec<Item> = (0..n_items)
            .map(|i| Item { feature: format!("f{i}"), value: format!("{i}.0") })
            .collect();
        let rule = RuleTuple::conjunction(
            &items,
            Item {
                feature: "target_risk".into(),
                value: if high { "1.0" } else { "0.0" }.into(),
            },
            RuleStats { support: 0.2, confidence: 0.8, lift: 1.0 },
        );
        let flipped = corrupt_rule(&rule).unwrap();
        prop_assert_ne!(flipped.consequent_token(), rule.consequent_token());
        prop_assert_eq!(flipped.antecedent_tokens(), rule.antecedent_tokens());
        let back = corrupt_rule(&flipped).unwrap();
        prop_assert_eq!(back, rule);
    }
}
