//! Per-state action space: heuristic recognition, element encoding and the
//! online-trained action discriminator.

mod discriminator;
mod encode;
mod heuristic;
mod input;
mod probe;

pub use discriminator::{
    DiscriminatorConfig, DiscriminatorState, Phase, ProbeSample, UpdateOutcome, LABEL_CLICK, LABEL_DBCLICK,
    LABEL_NONE,
};
pub use encode::{encode_element, ElementEmbedding};
pub use heuristic::{candidate_leaves, heuristic_class, recognize_discriminated, recognize_heuristic};
pub use input::{generate_input_value, FieldDescriptor, InputGenerator, InputRule};
pub use probe::{probe_page, ProbeOutcome, ProbeRound};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geom::{BBox, Point};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionClass {
    Click,
    Dbclick,
    Input,
    FormFill,
    Select,
}

impl ActionClass {
    pub fn needs_payload(self) -> bool {
        matches!(self, ActionClass::Input | ActionClass::FormFill | ActionClass::Select)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Heuristic,
    Discriminator,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Payload {
    /// Text typed into an input or textarea.
    Text(String),
    /// Value of the chosen `<option>`.
    Choice(String),
    /// Field locator -> value for every fillable descendant of a form.
    Form(Vec<(String, String)>),
}

/// An actionable element on the current page.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub locator: String,
    pub class: ActionClass,
    pub center: Point,
    pub bbox: BBox,
    pub payload: Option<Payload>,
    pub origin: Origin,
}

impl Action {
    pub fn new(locator: impl Into<String>, class: ActionClass, bbox: BBox, payload: Option<Payload>, origin: Origin) -> Self {
        Self { locator: locator.into(), class, center: bbox.center(), bbox, payload, origin }
    }

    /// The same element with a different interaction (used by probing).
    pub fn with_class(&self, class: ActionClass) -> Self {
        Self { class, payload: None, ..self.clone() }
    }
}

/// Element locator -> bounding box in page pixels.
pub type Geometry = BTreeMap<String, BBox>;

/// Clips `bbox` to the page. `None` when nothing visible remains.
pub(crate) fn visible_box(bbox: &BBox, page: (f64, f64)) -> Option<BBox> {
    let x0 = bbox.x.max(0.0);
    let y0 = bbox.y.max(0.0);
    let x1 = (bbox.x + bbox.w).min(page.0);
    let y1 = (bbox.y + bbox.h).min(page.1);
    (x1 > x0 && y1 > y0).then(|| BBox::new(x0, y0, x1 - x0, y1 - y0))
}
