pub mod cli;
pub mod estimators;
pub mod genetics;
pub mod infocore;
pub mod mixtures;
pub mod planner;
pub mod robomendel;
