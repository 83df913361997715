pub mod affect;
pub mod agent;
pub mod arguments;
pub mod beliefs;
pub mod cli;
pub mod metacog;
pub mod planner;
pub mod scenario;
pub mod world;
