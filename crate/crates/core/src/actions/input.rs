use rand::Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::dom::Node;
use crate::error::{Error, Result};
use crate::rng::RunRng;

/// Config rule: when any descriptor attribute matches `attr_regex`, use `value`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputRule {
    pub attr_regex: String,
    pub value: String,
}

/// The attributes of a form field that drive value generation.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FieldDescriptor {
    pub tag: String,
    pub input_type: String,
    pub name: String,
    pub id: String,
    pub placeholder: String,
}

impl FieldDescriptor {
    pub fn from_node(node: &Node) -> Self {
        let attr = |k: &str| node.get_attr(k).unwrap_or("").to_string();
        let input_type = match node.tag.as_str() {
            "textarea" => "textarea".to_string(),
            _ => node.get_attr("type").unwrap_or("text").to_ascii_lowercase(),
        };
        Self { tag: node.tag.clone(), input_type, name: attr("name"), id: attr("id"), placeholder: attr("placeholder") }
    }

    fn matchable(&self) -> [&str; 4] {
        [&self.name, &self.id, &self.input_type, &self.placeholder]
    }
}

/// Fixed values from configuration, otherwise seeded random text shaped by
/// the field type.
pub fn generate_input_value(field: &FieldDescriptor, rules: &[(Regex, String)], rng: &mut RunRng) -> String {
    for (re, value) in rules {
        if field.matchable().iter().any(|v| !v.is_empty() && re.is_match(v)) {
            return value.clone();
        }
    }
    match field.input_type.as_str() {
        "number" | "range" => {
            let len = rng.gen_range(1..=6);
            (0..len).map(|i| char::from(b'0' + rng.gen_range(if i == 0 { 1 } else { 0 }..10))).collect()
        }
        "date" => format!("{:04}-{:02}-{:02}", rng.gen_range(1990..2030), rng.gen_range(1..=12), rng.gen_range(1..=28)),
        "email" => format!("{}@example.com", alnum(rng, 8)),
        "tel" => (0..10).map(|_| char::from(b'0' + rng.gen_range(0..10))).collect(),
        "url" => format!("https://example.com/{}", alnum(rng, 6)),
        _ => alnum(rng, 8),
    }
}

fn alnum(rng: &mut RunRng, len: usize) -> String {
    const CHARS: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";
    (0..len).map(|_| char::from(CHARS[rng.gen_range(0..CHARS.len())])).collect()
}

/// Stateful generator owned by the explorer.
pub struct InputGenerator {
    rules: Vec<(Regex, String)>,
    rng: RunRng,
}

impl InputGenerator {
    pub fn new(rules: &[InputRule], rng: RunRng) -> Result<Self> {
        let rules = rules
            .iter()
            .map(|r| {
                Regex::new(&r.attr_regex)
                    .map(|re| (re, r.value.clone()))
                    .map_err(|e| Error::Config(format!("bad input rule regex {:?}: {e}", r.attr_regex)))
            })
            .collect::<Result<_>>()?;
        Ok(Self { rules, rng })
    }

    pub fn value_for(&mut self, node: &Node) -> String {
        generate_input_value(&FieldDescriptor::from_node(node), &self.rules, &mut self.rng)
    }

    pub fn pick(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn field(ty: &str, name: &str) -> FieldDescriptor {
        FieldDescriptor { tag: "input".into(), input_type: ty.into(), name: name.into(), ..Default::default() }
    }

    #[test]
    fn configured_rule_wins() {
        let rules = vec![(Regex::new("(?i)pass").unwrap(), "Secr3t!".to_string())];
        let mut rng = stream(1, "t");
        assert_eq!(generate_input_value(&field("password", "password"), &rules, &mut rng), "Secr3t!");
    }

    #[test]
    fn number_fields_get_digits() {
        let mut rng = stream(2, "t");
        for _ in 0..50 {
            let v = generate_input_value(&field("number", "qty"), &[], &mut rng);
            assert!(!v.is_empty() && v.chars().all(|c| c.is_ascii_digit()), "{v}");
        }
    }

    #[test]
    fn date_fields_get_iso_dates() {
        let mut rng = stream(3, "t");
        let v = generate_input_value(&field("date", "d"), &[], &mut rng);
        assert_eq!(v.len(), 10);
        assert_eq!(&v[4..5], "-");
    }

    #[test]
    fn same_seed_same_value() {
        let a = generate_input_value(&field("text", "q"), &[], &mut stream(9, "t"));
        let b = generate_input_value(&field("text", "q"), &[], &mut stream(9, "t"));
        assert_eq!(a, b);
    }

    #[test]
    fn bad_regex_is_a_config_error() {
        let rules = [InputRule { attr_regex: "(".into(), value: "x".into() }];
        assert!(matches!(InputGenerator::new(&rules, stream(0, "t")), Err(Error::Config(_))));
    }
}
