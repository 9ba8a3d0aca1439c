//! Backend that drives a real page over the DevTools-style WebSocket
//! protocol: navigation, script evaluation for DOM extraction and event
//! dispatch, and full-page screenshots.

use std::time::Duration;

use serde_json::json;

use crate::dom::{parse_html, Arena, DomNode};
use crate::dsl::Action;

use super::protocol::{
    evaluate_params, navigate_params, set_content_params, BrowserClient, DispatchSpec, EVALUATE,
    NAVIGATE, OUTER_HTML_PROBE, SCREENSHOT, SET_CONTENT,
};
use super::{Backend, BackendKind, EnvError, PageSource};

#[derive(Debug, Clone)]
pub struct BrowserConfig {
    pub endpoint: String,
    /// Bound on each protocol round-trip, so no single action can wedge a run.
    pub action_timeout: Duration,
}

impl BrowserConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        BrowserConfig {
            endpoint: endpoint.into(),
            action_timeout: Duration::from_secs(10),
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.action_timeout = timeout;
        self
    }
}

pub struct BrowserBackend {
    client: BrowserClient,
}

impl BrowserBackend {
    pub fn connect(config: &BrowserConfig) -> Result<Self, EnvError> {
        let client = BrowserClient::connect(&config.endpoint, config.action_timeout)
            .map_err(EnvError::LoadFailure)?;
        Ok(BrowserBackend { client })
    }
}

impl Backend for BrowserBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Browser
    }

    fn navigate(&mut self, source: &PageSource) -> Result<(), EnvError> {
        match source {
            PageSource::Url(url) => self
                .client
                .call(NAVIGATE, navigate_params(url))
                .map(drop)
                .map_err(EnvError::LoadFailure),
            PageSource::File(_) | PageSource::Inline(_) => {
                let html = source.read_html()?;
                self.client
                    .call(SET_CONTENT, set_content_params(&html))
                    .map(drop)
                    .map_err(EnvError::LoadFailure)
            }
        }
    }

    fn arena(&mut self) -> Result<Arena, EnvError> {
        let result = self
            .client
            .call(EVALUATE, evaluate_params(OUTER_HTML_PROBE))
            .map_err(EnvError::CaptureFailure)?;
        let html = result
            .get("value")
            .and_then(|v| v.as_str())
            .ok_or_else(|| EnvError::CaptureFailure("evaluate returned no markup".into()))?;
        Ok(parse_html(html))
    }

    fn screenshot(&mut self) -> Result<Option<(Vec<u8>, &'static str)>, EnvError> {
        let result = self
            .client
            .call(SCREENSHOT, json!({}))
            .map_err(EnvError::CaptureFailure)?;
        let data = result
            .get("data")
            .and_then(|v| v.as_str())
            .ok_or_else(|| EnvError::CaptureFailure("screenshot returned no data".into()))?;
        use base64::Engine;
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(data)
            .map_err(|e| EnvError::CaptureFailure(format!("screenshot not base64: {e}")))?;
        Ok(Some((bytes, "png")))
    }

    fn dispatch(&mut self, target: &DomNode, action: &Action) -> Result<(), EnvError> {
        let script = DispatchSpec::for_action(&target.xpath, action).to_script();
        let result = self
            .client
            .call(EVALUATE, evaluate_params(&script))
            .map_err(EnvError::ExecutionFailure)?;
        match result.get("value").and_then(|v| v.as_str()) {
            Some("ok") => Ok(()),
            Some(other) => Err(EnvError::ExecutionFailure(format!(
                "dispatch on {} returned {other:?}",
                target.xpath
            ))),
            None => Err(EnvError::ExecutionFailure("dispatch returned no value".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::ActionSequence;
    use crate::env::testkit::MockBrowserServer;
    use crate::env::{load_page, load_simulator, ArtifactStore, EnvSession};
    use crate::dom::AnnotateOptions;

    const COUNTER: &str = concat!(
        "<html><head><title>Counter</title></head><body>",
        "<button data-action=\"increment\" data-target=\"display\">Increment</button>",
        "<p id=\"display\" data-count=\"0\">Count: 0</p>",
        "</body></html>",
    );

    fn browser_session(server: &MockBrowserServer, source: PageSource) -> EnvSession {
        let config = BrowserConfig::new(server.endpoint()).with_timeout(Duration::from_secs(2));
        let backend = BrowserBackend::connect(&config).unwrap();
        load_page(
            source,
            Box::new(backend),
            AnnotateOptions::default(),
            ArtifactStore::ephemeral(),
        )
        .unwrap()
    }

    #[test]
    fn unreachable_endpoint_is_a_load_failure() {
        let port = {
            let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
            listener.local_addr().unwrap().port()
        };
        let config = BrowserConfig::new(format!("ws://127.0.0.1:{port}"));
        match BrowserBackend::connect(&config) {
            Err(EnvError::LoadFailure(_)) => {}
            Err(other) => panic!("got {other:?}"),
            Ok(_) => panic!("connected to a dead port"),
        }
    }

    #[test]
    fn browser_and_simulator_agree_on_state_keys() {
        let server = MockBrowserServer::spawn(vec![]);
        let mut via_browser = browser_session(&server, PageSource::Inline(COUNTER.into()));
        let mut via_simulator = load_simulator(PageSource::Inline(COUNTER.into())).unwrap();
        assert_eq!(
            via_browser.current().state_key,
            via_simulator.current().state_key
        );

        let seq = ActionSequence::new(vec![Action::Click(0), Action::Click(0)]);
        let browser_states = via_browser.run_sequence(&seq).unwrap();
        let simulator_states = via_simulator.run_sequence(&seq).unwrap();
        assert_eq!(
            browser_states.last().unwrap().state_key,
            simulator_states.last().unwrap().state_key
        );
        assert!(crate::dom::outline(&via_browser.current().dom).contains("Count: 2"));
    }

    #[test]
    fn browser_screenshots_are_stored_artifacts() {
        let server = MockBrowserServer::spawn(vec![]);
        let session = browser_session(&server, PageSource::Inline(COUNTER.into()));
        let shot = &session.current().screenshot;
        assert!(!shot.digest.is_empty());
    }

    #[test]
    fn registered_urls_navigate_and_unknown_urls_fail() {
        let server = MockBrowserServer::spawn(vec![(
            "https://fixtures.test/counter".into(),
            COUNTER.into(),
        )]);
        let session = browser_session(
            &server,
            PageSource::Url("https://fixtures.test/counter".into()),
        );
        assert!(crate::dom::outline(&session.current().dom).contains("Count: 0"));

        let config = BrowserConfig::new(server.endpoint()).with_timeout(Duration::from_secs(2));
        let backend = BrowserBackend::connect(&config).unwrap();
        match load_page(
            PageSource::Url("https://fixtures.test/missing".into()),
            Box::new(backend),
            AnnotateOptions::default(),
            ArtifactStore::ephemeral(),
        ) {
            Err(EnvError::LoadFailure(_)) => {}
            Err(other) => panic!("got {other:?}"),
            Ok(_) => panic!("navigated to an unregistered url"),
        }
    }

    #[test]
    fn silent_endpoint_times_out() {
        let server = MockBrowserServer::spawn_unresponsive();
        let config =
            BrowserConfig::new(server.endpoint()).with_timeout(Duration::from_millis(200));
        let mut backend = BrowserBackend::connect(&config).unwrap();
        let err = backend
            .navigate(&PageSource::Inline(COUNTER.into()))
            .unwrap_err();
        let text = err.to_string();
        assert!(text.contains("timed out"), "got {text}");
    }
}
