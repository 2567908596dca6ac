#include "refacer/image.hpp"

#include <string>

#include "refacer/error.hpp"

namespace refacer {

std::string_view to_string(DomainTag tag) noexcept {
  switch (tag) {
    case DomainTag::Original: return "original";
    case DomainTag::Blurred: return "blurred";
    case DomainTag::Removed: return "removed";
    case DomainTag::Reconstructed: return "reconstructed";
  }
  return "original";
}

DomainTag parse_domain_tag(std::string_view name) {
  if (name == "original") return DomainTag::Original;
  if (name == "blurred" || name == "blur") return DomainTag::Blurred;
  if (name == "removed" || name == "remove") return DomainTag::Removed;
  if (name == "reconstructed") return DomainTag::Reconstructed;
  throw Error(ErrorKind::InvalidArgument, "unknown domain '" + std::string(name) + "'");
}

}  // namespace refacer
