mod support;

#[test]
fn battery_guess_monotone() {
    support::battery_guess_monotone().unwrap();
}

#[test]
fn particle_capacity_conserved() {
    support::particle_capacity_conserved().unwrap();
}

#[test]
fn parse_print_round_trip() {
    support::parse_print_round_trip().unwrap();
}

#[test]
fn trace_round_trip() {
    support::trace_round_trip().unwrap();
}

#[test]
fn bias_idempotent() {
    support::bias_idempotent().unwrap();
}

#[test]
fn deterministic_under_seed() {
    support::deterministic_under_seed().unwrap();
}

#[test]
fn sensor_accuracy() {
    support::sensor_accuracy(100_000).unwrap();
}
