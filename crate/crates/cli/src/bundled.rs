//! Scenarios shipped inside the binary.

const SCENARIOS: &[(&str, &str)] = &[
    ("odd_reflection_1d", include_str!("../scenarios/odd_reflection_1d.json")),
    ("drift_reflection_1d", include_str!("../scenarios/drift_reflection_1d.json")),
    ("halfspace_2d", include_str!("../scenarios/halfspace_2d.json")),
    ("disk_extension", include_str!("../scenarios/disk_extension.json")),
    ("poisson_square", include_str!("../scenarios/poisson_square.json")),
    ("perron_vs_direct_disk", include_str!("../scenarios/perron_vs_direct_disk.json")),
    ("resolvent_interval", include_str!("../scenarios/resolvent_interval.json")),
    ("heat_interval", include_str!("../scenarios/heat_interval.json")),
    ("verify_all_square", include_str!("../scenarios/verify_all_square.json")),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    SCENARIOS.iter().map(|(n, _)| *n)
}

pub fn get(name: &str) -> Option<&'static str> {
    SCENARIOS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// The `description` field of a bundled scenario.
pub fn description(name: &str) -> Option<String> {
    let v: serde_json::Value = serde_json::from_str(get(name)?).ok()?;
    v.get("description")?.as_str().map(str::to_string)
}
