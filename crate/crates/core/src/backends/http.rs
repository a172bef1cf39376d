//! OpenAI-compatible chat-completions client.
//!
//! Sends `POST {endpoint_url}/chat/completions` with system and user
//! messages; an image, when present, is attached to the user message as a
//! base64 data URI. Transient network failures are retried with exponential
//! backoff; non-2xx statuses surface immediately with a body excerpt.

use std::time::Duration;

use base64::Engine as _;
use serde_json::{json, Value};

use super::{BackendConfig, BackendError, ChatRequest};

const EXCERPT_LEN: usize = 300;

pub(super) struct HttpClient {
    agent: ureq::Agent,
    endpoint: String,
    api_key: Option<String>,
}

impl HttpClient {
    pub(super) fn new(config: &BackendConfig) -> Result<Self, BackendError> {
        let endpoint = config
            .endpoint_url
            .as_ref()
            .expect("validated http config")
            .trim_end_matches('/')
            .to_string();
        let api_key = match &config.api_key_env {
            Some(var) => Some(
                std::env::var(var).map_err(|_| BackendError::MissingApiKey(var.clone()))?,
            ),
            None => None,
        };
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(120)))
            .build()
            .into();
        Ok(Self {
            agent,
            endpoint,
            api_key,
        })
    }

    pub(super) fn complete(
        &self,
        config: &BackendConfig,
        request: &ChatRequest,
    ) -> Result<String, BackendError> {
        let body = build_body(config, request)?;
        let url = format!("{}/chat/completions", self.endpoint);

        let mut last_error = String::new();
        for attempt in 0..config.max_attempts {
            if attempt > 0 {
                let backoff = config.backoff_ms.saturating_mul(1 << (attempt - 1));
                std::thread::sleep(Duration::from_millis(backoff));
            }
            let mut req = self.agent.post(&url);
            if let Some(key) = &self.api_key {
                req = req.header("Authorization", &format!("Bearer {key}"));
            }
            match req.send_json(&body) {
                Ok(mut response) => {
                    let status = response.status().as_u16();
                    let text = response
                        .body_mut()
                        .read_to_string()
                        .unwrap_or_default();
                    if !(200..300).contains(&status) {
                        return Err(BackendError::Status {
                            status,
                            excerpt: excerpt(&text),
                        });
                    }
                    return extract_content(&text);
                }
                Err(e) => {
                    last_error = e.to_string();
                }
            }
        }
        Err(BackendError::Network {
            attempts: config.max_attempts,
            last_error,
        })
    }
}

fn build_body(config: &BackendConfig, request: &ChatRequest) -> Result<Value, BackendError> {
    let user_content: Value = match &request.image_ref {
        Some(path) => {
            let bytes = std::fs::read(path).map_err(|source| BackendError::UnreadableImage {
                path: path.display().to_string(),
                source,
            })?;
            let encoded = base64::engine::general_purpose::STANDARD.encode(bytes);
            let mime = guess_mime(path.extension().and_then(|e| e.to_str()));
            json!([
                {"type": "text", "text": request.user_prompt},
                {"type": "image_url", "image_url": {"url": format!("data:{mime};base64,{encoded}")}}
            ])
        }
        None => Value::String(request.user_prompt.clone()),
    };

    let mut messages = Vec::new();
    if !request.system_prompt.is_empty() {
        messages.push(json!({"role": "system", "content": request.system_prompt}));
    }
    messages.push(json!({"role": "user", "content": user_content}));

    Ok(json!({
        "model": config.model_name,
        "messages": messages,
        "temperature": config.temperature,
        "max_tokens": config.max_tokens,
    }))
}

fn guess_mime(extension: Option<&str>) -> &'static str {
    match extension.map(|e| e.to_ascii_lowercase()).as_deref() {
        Some("jpg") | Some("jpeg") => "image/jpeg",
        Some("gif") => "image/gif",
        Some("webp") => "image/webp",
        _ => "image/png",
    }
}

fn extract_content(body: &str) -> Result<String, BackendError> {
    let value: Value = serde_json::from_str(body)
        .map_err(|e| BackendError::MalformedResponse(format!("invalid JSON: {e}")))?;
    let content = value
        .get("choices")
        .and_then(|c| c.get(0))
        .and_then(|c| c.get("message"))
        .and_then(|m| m.get("content"))
        .and_then(|c| c.as_str())
        .ok_or_else(|| {
            BackendError::MalformedResponse(
                "missing choices[0].message.content string".to_string(),
            )
        })?;
    Ok(content.to_string())
}

fn excerpt(text: &str) -> String {
    if text.len() <= EXCERPT_LEN {
        return text.to_string();
    }
    let mut end = EXCERPT_LEN;
    while !text.is_char_boundary(end) {
        end -= 1;
    }
    format!("{}...", &text[..end])
}
