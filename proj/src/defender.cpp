#include "plugdef/defender.hpp"

namespace plugdef::defender {

std::string to_string(ProcessorKind k) {
  switch (k) {
    case ProcessorKind::Transformer: return "transformer";
    case ProcessorKind::Linear: return "linear";
    case ProcessorKind::Ffn: return "ffn";
    case ProcessorKind::Bottleneck: return "bottleneck";
    case ProcessorKind::Fd: return "fd";
  }
  return "?";
}

ProcessorKind processor_kind_from(const std::string& s) {
  if (s == "transformer") return ProcessorKind::Transformer;
  if (s == "linear") return ProcessorKind::Linear;
  if (s == "ffn") return ProcessorKind::Ffn;
  if (s == "bottleneck") return ProcessorKind::Bottleneck;
  if (s == "fd") return ProcessorKind::Fd;
  throw std::invalid_argument("unknown processor kind: " + s);
}

std::string to_string(PartitionPolicy p) {
  switch (p) {
    case PartitionPolicy::LayerNormOnly: return "layer-norm-only";
    case PartitionPolicy::All: return "all";
    case PartitionPolicy::None: return "none";
  }
  return "?";
}

PartitionPolicy partition_policy_from(const std::string& s) {
  if (s == "layer-norm-only") return PartitionPolicy::LayerNormOnly;
  if (s == "all") return PartitionPolicy::All;
  if (s == "none") return PartitionPolicy::None;
  throw std::invalid_argument("unknown partition policy: " + s);
}

} // namespace plugdef::defender
