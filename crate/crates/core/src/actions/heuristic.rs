use super::{visible_box, Action, ActionClass, DiscriminatorState, Geometry, InputGenerator, Origin, Payload};
use crate::dom::{DomTree, ElementRef, Node};
use crate::error::Result;
use crate::geom::BBox;

use super::encode::encode_element;

const CLICK_INPUT_TYPES: &[&str] = &["button", "submit", "reset", "image", "checkbox", "radio"];
const SKIPPED_INPUT_TYPES: &[&str] = &["hidden", "file"];
const NEVER_CANDIDATES: &[&str] = &["html", "head", "body", "br", "hr", "option", "optgroup", "script", "style"];

/// Action class assigned by tag (and `type` for `<input>`).
pub fn heuristic_class(node: &Node) -> Option<ActionClass> {
    match node.tag.as_str() {
        "a" | "button" => Some(ActionClass::Click),
        "input" => {
            let ty = node.get_attr("type").unwrap_or("text").to_ascii_lowercase();
            if CLICK_INPUT_TYPES.contains(&ty.as_str()) {
                Some(ActionClass::Click)
            } else if SKIPPED_INPUT_TYPES.contains(&ty.as_str()) {
                None
            } else {
                Some(ActionClass::Input)
            }
        }
        "textarea" => Some(ActionClass::Input),
        "form" | "fieldset" => Some(ActionClass::FormFill),
        "select" => Some(ActionClass::Select),
        _ => None,
    }
}

fn in_head(el: &ElementRef<'_>) -> bool {
    el.node.tag == "head" || el.ancestors.iter().any(|a| a.tag == "head")
}

fn is_fillable(node: &Node) -> bool {
    matches!(heuristic_class(node), Some(ActionClass::Input | ActionClass::Select))
}

fn select_choice(node: &Node, gen: &mut InputGenerator) -> String {
    let options: Vec<&Node> = node.children.iter().filter(|c| c.tag == "option").collect();
    if options.is_empty() {
        return String::new();
    }
    let opt = options[gen.pick(options.len())];
    opt.get_attr("value").map(str::to_string).unwrap_or_else(|| opt.text.clone())
}

/// Table-driven recognition in document order. Elements without a visible box
/// are skipped; boxes are clipped to the page.
pub fn recognize_heuristic(
    tree: &DomTree,
    geometry: &Geometry,
    page: (f64, f64),
    gen: &mut InputGenerator,
) -> Vec<Action> {
    let elements = tree.elements();
    let mut out = Vec::new();
    for el in &elements {
        let Some(class) = heuristic_class(el.node) else { continue };
        if in_head(el) {
            continue;
        }
        let Some(bbox) = geometry.get(&el.locator).and_then(|b| visible_box(b, page)) else { continue };
        let payload = match class {
            ActionClass::Input => Some(Payload::Text(gen.value_for(el.node))),
            ActionClass::Select => Some(Payload::Choice(select_choice(el.node, gen))),
            ActionClass::FormFill => {
                let prefix = format!("{}/", el.locator);
                let fields = elements
                    .iter()
                    .filter(|d| d.locator.starts_with(&prefix) && is_fillable(d.node))
                    .map(|d| {
                        let value = if d.node.tag == "select" {
                            select_choice(d.node, gen)
                        } else {
                            gen.value_for(d.node)
                        };
                        (d.locator.clone(), value)
                    })
                    .collect();
                Some(Payload::Form(fields))
            }
            ActionClass::Click | ActionClass::Dbclick => None,
        };
        out.push(Action::new(el.locator.clone(), class, bbox, payload, Origin::Heuristic));
    }
    out
}

/// Visible leaf elements that no heuristic rule claims, neither directly nor
/// through an actionable ancestor. These are what probing executes and what
/// the discriminator classifies.
pub fn candidate_leaves<'a>(tree: &'a DomTree, geometry: &Geometry, page: (f64, f64)) -> Vec<(ElementRef<'a>, BBox)> {
    tree.elements()
        .into_iter()
        .filter(|el| el.node.is_leaf())
        .filter(|el| !NEVER_CANDIDATES.contains(&el.node.tag.as_str()) && !in_head(el))
        .filter(|el| heuristic_class(el.node).is_none() && el.ancestors.iter().all(|a| heuristic_class(a).is_none()))
        .filter_map(|el| {
            let bbox = geometry.get(&el.locator).and_then(|b| visible_box(b, page))?;
            Some((el, bbox))
        })
        .collect()
}

/// Extra actions proposed by a trained discriminator (phase 1 only).
pub fn recognize_discriminated(
    tree: &DomTree,
    geometry: &Geometry,
    page: (f64, f64),
    disc: &DiscriminatorState,
) -> Result<Vec<Action>> {
    let mut out = Vec::new();
    for (el, bbox) in candidate_leaves(tree, geometry, page) {
        let emb = encode_element(el.node, &el.ancestors, disc.config.element_dim);
        let class = match disc.predict(&emb)? {
            1 => ActionClass::Click,
            2 => ActionClass::Dbclick,
            _ => continue,
        };
        out.push(Action::new(el.locator.clone(), class, bbox, None, Origin::Discriminator));
    }
    Ok(out)
}
