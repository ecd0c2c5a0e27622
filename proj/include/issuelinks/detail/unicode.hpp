#pragma once

#include <string>
#include <string_view>

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utypes.h>

#include "issuelinks/error.hpp"

namespace issuelinks::detail {

inline const icu::Normalizer2& nfc_normalizer() {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* norm = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status) || norm == nullptr) {
    throw Error(ErrorKind::Io, "ICU NFC normalizer unavailable");
  }
  return *norm;
}

inline icu::UnicodeString to_nfc_unicode(std::string_view utf8) {
  const auto src = icu::UnicodeString::fromUTF8(
      icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
  UErrorCode status = U_ZERO_ERROR;
  const auto& norm = nfc_normalizer();
  if (norm.isNormalized(src, status) && U_SUCCESS(status)) return src;
  status = U_ZERO_ERROR;
  auto out = norm.normalize(src, status);
  if (U_FAILURE(status)) return src;
  return out;
}

inline std::string to_utf8(const icu::UnicodeString& s) {
  std::string out;
  s.toUTF8String(out);
  return out;
}

inline std::string nfc(std::string_view utf8) { return to_utf8(to_nfc_unicode(utf8)); }

}  // namespace issuelinks::detail
