//! Scenarios shipped with the crate.

const BUILTIN: &[(&str, &str)] = &[
    ("fig2b", include_str!("../../scenarios/fig2b.toml")),
    ("fig2cd", include_str!("../../scenarios/fig2cd.toml")),
    ("fig3a", include_str!("../../scenarios/fig3a.toml")),
    ("fig3b", include_str!("../../scenarios/fig3b.toml")),
    ("fig3c", include_str!("../../scenarios/fig3c.toml")),
    ("fig3d", include_str!("../../scenarios/fig3d.toml")),
    ("control-full-illum-exactN", include_str!("../../scenarios/control-full-illum-exactN.toml")),
];

/// TOML text of a shipped scenario.
pub fn builtin(name: &str) -> Option<&'static str> {
    BUILTIN.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn builtin_names() -> impl Iterator<Item = &'static str> {
    BUILTIN.iter().map(|(n, _)| *n)
}
