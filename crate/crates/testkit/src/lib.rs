//! Fixtures, seeded generators, a naive reference interpreter and the
//! property checks shared by the integration and acceptance tests.

pub mod checks;
pub mod fixtures;
pub mod gen;
pub mod oracle;
