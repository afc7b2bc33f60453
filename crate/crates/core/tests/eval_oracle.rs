//! Metric aggregation against an independent brute-force oracle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use forge_core::eval::{evaluate, parse_predictions};

/// Straight-line recomputation of HR@k / NDCG@k from the raw lines, written
/// independently of the evaluation path it checks.
fn brute_force(
    lines: &[(String, Vec<String>)],
    truths: &[(String, String)],
    k: usize,
) -> (f64, f64) {
    let mut hit_sum = 0.0;
    let mut gain_sum = 0.0;
    for (query, truth) in truths {
        let ranked = lines.iter().find(|(q, _)| q == query);
        if let Some((_, items)) = ranked {
            for (pos, item) in items.iter().enumerate() {
                if pos < k && item == truth {
                    hit_sum += 1.0;
                    gain_sum += 1.0 / ((pos as f64) + 2.0).log2();
                }
            }
        }
    }
    (hit_sum / truths.len() as f64, gain_sum / truths.len() as f64)
}

#[test]
fn matches_brute_force_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..200 {
        let n_queries = rng.random_range(1..20usize);
        let pool = rng.random_range(5..40usize);
        let list_len = rng.random_range(1..=pool.min(15));

        let mut lines: Vec<(String, Vec<String>)> = Vec::new();
        let mut truths: Vec<(String, String)> = Vec::new();
        for q in 0..n_queries {
            let query = format!("q{q}");
            // Distinct ranked items.
            let mut order: Vec<usize> = (0..pool).collect();
            for i in (1..pool).rev() {
                let j = rng.random_range(0..=i);
                order.swap(i, j);
            }
            let items: Vec<String> = order[..list_len].iter().map(|i| format!("v{i}")).collect();
            // Truth sometimes inside the list, sometimes not.
            let truth = if rng.random_bool(0.7) {
                items[rng.random_range(0..items.len())].clone()
            } else {
                format!("v{}", rng.random_range(0..pool))
            };
            if rng.random_bool(0.9) {
                lines.push((query.clone(), items));
            }
            truths.push((query, truth));
        }

        let text: String = lines
            .iter()
            .map(|(q, items)| format!("{q}\t{}\n", items.join(" ")))
            .collect();
        let preds = parse_predictions(&text).unwrap();
        let ks = [1usize, 3, 5, 10];
        let metrics = evaluate::<f64>(&preds, &truths, &ks).unwrap();
        let group = metrics.group("all").unwrap();
        for &k in &ks {
            let (hr, ndcg) = brute_force(&lines, &truths, k);
            let point = &group.per_k[&k];
            assert!(
                (point.hr - hr).abs() <= 1e-12,
                "trial {trial} k={k}: hr {} vs oracle {hr}",
                point.hr
            );
            assert!(
                (point.ndcg - ndcg).abs() <= 1e-12,
                "trial {trial} k={k}: ndcg {} vs oracle {ndcg}",
                point.ndcg
            );
            assert!(point.ndcg <= point.hr + 1e-15);
        }
        // Monotone in k.
        for pair in ks.windows(2) {
            let lo = &group.per_k[&pair[0]];
            let hi = &group.per_k[&pair[1]];
            assert!(lo.hr <= hi.hr + 1e-15);
            assert!(lo.ndcg <= hi.ndcg + 1e-15);
        }
    }
}

#[test]
fn f32_and_f64_agree_within_float_precision() {
    let preds = parse_predictions("q1\ta b c\nq2\td e f\nq3\tx y z\n").unwrap();
    let truths = vec![
        ("q1".to_string(), "b".to_string()),
        ("q2".to_string(), "f".to_string()),
        ("q3".to_string(), "none".to_string()),
    ];
    let m64 = evaluate::<f64>(&preds, &truths, &[3]).unwrap();
    let m32 = evaluate::<f32>(&preds, &truths, &[3]).unwrap();
    let p64 = m64.group("all").unwrap().per_k[&3];
    let p32 = m32.group("all").unwrap().per_k[&3];
    assert!((p64.hr - p32.hr as f64).abs() < 1e-6);
    assert!((p64.ndcg - p32.ndcg as f64).abs() < 1e-6);
}
