pub mod apk;
pub mod catalog;
pub mod evidence;
pub mod taxonomy;
pub mod unity;
pub mod unreal;
pub mod policy;
pub mod probe;
pub mod compliance;
pub mod pipeline;
