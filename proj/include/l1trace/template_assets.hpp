#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace l1trace::templates {

namespace detail {

struct EmbeddedTemplate {
  std::string_view name;
  std::string_view text;
  std::string_view expected_sha256;
};

const std::vector<EmbeddedTemplate>& embedded();

}  // namespace detail

class TemplateDrift : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Template bytes as checked in under assets/templates (UTF-8, LF).
// Throws std::out_of_range for an unknown name.
std::string_view get(std::string_view name);

// name -> sha256 of the embedded bytes.
std::map<std::string, std::string> checksums();

// Recomputes every embedded checksum against SHA256SUMS; throws TemplateDrift
// naming the first mismatch.
void verify_all();

void verify(std::string_view name, std::string_view text, std::string_view expected_sha256);

// Substitutes {key} placeholders in one pass. Substituted values are not
// rescanned, so braces inside titles or abstracts are left alone. Unknown
// placeholders throw std::invalid_argument.
std::string render(std::string_view tmpl, const std::map<std::string, std::string, std::less<>>& values);

}  // namespace l1trace::templates
