//! Expected per-walk message counts: the closed form against the exact
//! process recurrence, and the savings the two-hop predictor buys.

use fedwalk::walker::{expected_messages, expected_messages_recurrence, expected_savings};

fn main() {
    println!("walk length 40, varying trigger probability p");
    println!("{:>5} {:>12} {:>12} {:>14}", "p", "closed form", "recurrence", "savings/walk");
    for step in 0..=8 {
        let p = step as f64 * 0.05;
        let closed = expected_messages(40, p);
        let exact = expected_messages_recurrence(40, p);
        let savings = expected_savings(40, p, 1, 1);
        println!("{p:>5.2} {closed:>12.4} {exact:>12.4} {savings:>14.4}");
    }

    println!();
    println!("projected totals for a 10,000-vertex graph, 80 walks per vertex");
    for p in [0.1, 0.2, 0.4] {
        println!(
            "  p={p}: {:>12.0} device-to-device messages saved",
            expected_savings(40, p, 10_000, 80)
        );
    }
}
