use std::sync::Arc;

use gridwalk::actions::{candidate_leaves, recognize_heuristic, Action, ActionClass, InputGenerator, Origin};
use gridwalk::dom::parse_document;
use gridwalk::env::{
    failure_signature, make_fixture, Environment, FixtureServer, FixtureSpec, Observation, SimApp, SimEnv,
};
use gridwalk::geom::Point;
use gridwalk::grid::{covered_cells, GridSpec};
use gridwalk::rng;
use proptest::prelude::*;

fn fixture_strategy() -> impl Strategy<Value = FixtureSpec> {
    (0usize..5, any::<u64>()).prop_map(|(k, seed)| match k {
        0 => FixtureSpec::deep_chain(4, 3, seed),
        1 => FixtureSpec::near_duplicate(3, 3, seed),
        2 => FixtureSpec::hidden_action(5, seed),
        3 => FixtureSpec::wide(3, 3, seed),
        _ => FixtureSpec::failing(seed),
    })
}

/// Every action the recogniser could emit on this page, plus every probe
/// candidate under both interaction classes.
fn page_actions(obs: &Observation) -> Vec<Action> {
    let tree = parse_document(&obs.html);
    let mut gen = InputGenerator::new(&[], rng::stream(0, "input")).unwrap();
    let mut actions = recognize_heuristic(&tree, &obs.geometry, obs.page_size, &mut gen);
    for (el, bbox) in candidate_leaves(&tree, &obs.geometry, obs.page_size) {
        for class in [ActionClass::Click, ActionClass::Dbclick] {
            actions.push(Action::new(el.locator.clone(), class, bbox, None, Origin::Discriminator));
        }
    }
    actions
}

fn walk(app: &Arc<SimApp>, picks: &[usize]) -> Vec<Observation> {
    let mut env = SimEnv::new(app.clone());
    let mut obs = env.reset().unwrap();
    let mut out = vec![obs.clone()];
    for &p in picks {
        let actions = page_actions(&obs);
        if actions.is_empty() {
            obs = env.reset().unwrap();
        } else {
            obs = env.step(&actions[p % actions.len()]).unwrap();
        }
        out.push(obs.clone());
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sim_is_a_function_of_seed_and_actions(spec in fixture_strategy(), picks in prop::collection::vec(any::<usize>(), 0..25)) {
        let (a, _) = make_fixture(&spec).unwrap();
        let (b, _) = make_fixture(&spec).unwrap();
        prop_assert_eq!(walk(&Arc::new(a), &picks), walk(&Arc::new(b), &picks));
    }

    #[test]
    fn every_emitted_action_maps_into_the_grid(spec in fixture_strategy(), n in 1usize..30) {
        let (app, _) = make_fixture(&spec).unwrap();
        let app = Arc::new(app);
        for id in 0..app.pages.len() {
            let page = &app.pages[id];
            let obs = Observation {
                html: page.html.clone(),
                geometry: page.geometry.clone(),
                page_size: page.page_size,
                console: Vec::new(),
                nav_url: String::new(),
            };
            let grid = GridSpec::new(n, obs.page_size.0, obs.page_size.1).unwrap();
            for a in page_actions(&obs) {
                prop_assert!(obs.geometry.contains_key(&a.locator));
                prop_assert!(grid.contains(a.center));
                prop_assert!(!covered_cells(Point::new(a.center.x, a.center.y), &grid).unwrap().is_empty());
            }
        }
    }

    #[test]
    fn failure_signature_is_idempotent(msg in "[ -~]{0,80}") {
        let once = failure_signature(&msg);
        prop_assert_eq!(failure_signature(&once), once);
    }

    #[test]
    fn failure_signature_idempotent_on_url_and_quote_shapes(
        path in "[a-z]{1,6}/[a-z0-9]{1,6}",
        n in 0u32..100_000,
        q in "[a-zA-Z0-9]{1,8}",
    ) {
        let msg = format!("Error {n}: failed at http://example.org/{path}?id={n}#x for \"{q}\" after {n}ms");
        let once = failure_signature(&msg);
        prop_assert_eq!(failure_signature(&once), once.clone());
        prop_assert!(!once.contains("?id="));
    }
}

fn get(url: &str) -> (u16, String) {
    let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
    let mut resp = agent.get(url).call().unwrap();
    (resp.status().as_u16(), resp.body_mut().read_to_string().unwrap())
}

#[test]
fn fixture_server_serves_every_page() {
    let (app, _) = make_fixture(&FixtureSpec::wide(2, 2, 1)).unwrap();
    let app = Arc::new(app);
    let server = FixtureServer::start(app.clone()).unwrap();
    let (status, body) = get(&server.start_url());
    assert_eq!(status, 200);
    assert_eq!(body, app.pages[app.start].html);
    for (id, page) in app.pages.iter().enumerate() {
        let (status, body) = get(&format!("{}/s/{id}", server.base_url()));
        assert_eq!(status, 200);
        assert_eq!(body, page.html);
    }
    assert_eq!(get(&format!("{}/s/{}", server.base_url(), app.pages.len())).0, 404);
    assert_eq!(get(&format!("{}/nope", server.base_url())).0, 404);
}
