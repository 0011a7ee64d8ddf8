//! Static bearer token per role. Mentors name themselves with
//! `X-Evaluator-Id`; identity management is out of scope.

use std::sync::Arc;

use axum::extract::FromRequestParts;
use axum::http::header::AUTHORIZATION;
use axum::http::request::Parts;

use crate::error::ApiError;
use crate::App;

pub const EVALUATOR_HEADER: &str = "x-evaluator-id";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Entrepreneur,
    Mentor,
    Admin,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Caller {
    pub role: Role,
    /// Set for mentors only.
    pub evaluator_id: Option<String>,
}

impl Caller {
    pub fn require(&self, roles: &[Role]) -> Result<(), ApiError> {
        if roles.contains(&self.role) {
            Ok(())
        } else {
            Err(ApiError::forbidden(format!("{:?} role may not call this endpoint", self.role)))
        }
    }

    pub fn is_mentor(&self) -> bool {
        self.role == Role::Mentor
    }

    /// The calling mentor's id.
    pub fn mentor(&self) -> Result<&str, ApiError> {
        self.require(&[Role::Mentor])?;
        Ok(self.evaluator_id.as_deref().expect("mentor callers carry an id"))
    }
}

pub const OWNERS: &[Role] = &[Role::Entrepreneur, Role::Admin];
pub const ANY: &[Role] = &[Role::Entrepreneur, Role::Mentor, Role::Admin];

impl FromRequestParts<Arc<App>> for Caller {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, app: &Arc<App>) -> Result<Self, Self::Rejection> {
        let token = parts
            .headers
            .get(AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .map(str::trim)
            .ok_or_else(ApiError::unauthorized)?;
        let t = &app.config.tokens;
        let role = if token == t.admin {
            Role::Admin
        } else if token == t.entrepreneur {
            Role::Entrepreneur
        } else if token == t.mentor {
            Role::Mentor
        } else {
            return Err(ApiError::unauthorized());
        };
        let evaluator_id = if role == Role::Mentor {
            let id = parts
                .headers
                .get(EVALUATOR_HEADER)
                .and_then(|v| v.to_str().ok())
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .ok_or_else(|| ApiError::unauthorized().with_message("mentor calls need an X-Evaluator-Id header"))?;
            if !app.store.read().mentors.contains_key(id) {
                return Err(ApiError::forbidden(format!("`{id}` is not a registered mentor")));
            }
            Some(id.to_string())
        } else {
            None
        };
        Ok(Caller { role, evaluator_id })
    }
}
