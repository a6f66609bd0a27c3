mod support;

use support::suites::*;

#[test]
fn geometry_properties() {
    println!("{}", geometry_suite(1).unwrap());
}

#[test]
fn skill_properties() {
    println!("{}", skill_suite(2).unwrap());
}

#[test]
fn gradients_match_finite_differences() {
    println!("{}", gradient_suite(3).unwrap());
}

#[test]
fn ppo_bandit_and_gae() {
    println!("{}", ppo_suite(4).unwrap());
}
