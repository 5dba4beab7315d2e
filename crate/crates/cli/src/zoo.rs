//! Bundled model descriptions.

pub const MODELS: &[(&str, &str)] = &[
    ("resnet20", include_str!("../zoo/resnet20.toml")),
    ("micronet", include_str!("../zoo/micronet.toml")),
    ("dw_emnist", include_str!("../zoo/dw_emnist.toml")),
];

pub fn get(name: &str) -> Option<&'static str> {
    MODELS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn names() -> impl Iterator<Item = &'static str> {
    MODELS.iter().map(|(n, _)| *n)
}
