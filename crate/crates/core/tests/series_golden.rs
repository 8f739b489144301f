use std::time::Instant;

use spt_core::rspt::{epsilon_series, render_sum_over_states};
use spt_core::GExpression;

const GOLDEN: [&str; 6] = [
    "g1",
    "-g2",
    "g3 + g1 g2^(1)",
    "-g4 - g2 g2^(1) - g1 g3^(1) - 1/2 g1^2 g2^(2)",
    "g5 + g3 g2^(1) + g1 g2^(1)^2 + g2 g3^(1) + g1 g4^(1) + g1 g2 g2^(2) + 1/2 g1^2 g3^(2) + 1/6 g1^3 g2^(3)",
    "-g6 - g4 g2^(1) - g2 g2^(1)^2 - g3 g3^(1) - 2 g1 g2^(1) g3^(1) - g2 g4^(1) - g1 g5^(1) \
     - 1/2 g2^2 g2^(2) - g1 g3 g2^(2) - 3/2 g1^2 g2^(1) g2^(2) - g1 g2 g3^(2) - 1/2 g1^2 g4^(2) \
     - 1/2 g1^2 g2 g2^(3) - 1/6 g1^3 g3^(3) - 1/24 g1^4 g2^(4)",
];

#[test]
fn first_six_orders_match_reference_expressions() {
    let start = Instant::now();
    let series = epsilon_series(6).unwrap();
    assert!(start.elapsed().as_secs_f64() < 10.0);
    for (result, text) in series.iter().zip(GOLDEN) {
        let expected: GExpression = text.parse().unwrap();
        assert_eq!(result.epsilon, expected, "order {}", result.order);
    }
    assert_eq!(series[5].epsilon.len(), 15);
}

#[test]
fn order_eight_is_fast_and_weight_homogeneous() {
    let start = Instant::now();
    let series = epsilon_series(8).unwrap();
    assert!(start.elapsed().as_secs_f64() < 60.0);
    for r in &series {
        assert!(r.epsilon.terms().all(|(m, _)| m.weight() == r.order as u32));
    }
}

#[test]
fn rendering_round_trips_through_text_and_json() {
    for r in epsilon_series(6).unwrap() {
        let text = r.epsilon.to_string();
        assert_eq!(text.parse::<GExpression>().unwrap(), r.epsilon);
        let json = serde_json::to_string(&r.epsilon).unwrap();
        assert_eq!(
            serde_json::from_str::<GExpression>(&json).unwrap(),
            r.epsilon
        );
    }
}

#[test]
fn third_order_sum_over_states() {
    let series = epsilon_series(3).unwrap();
    let text = render_sum_over_states(&series[2].epsilon);
    assert!(text.contains("W_{00}"), "{text}");
    assert!(text.contains("Σ'_{k,l}"), "{text}");
}
