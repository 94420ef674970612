#ifndef DEMANDMAP_COMMON_HPP_
#define DEMANDMAP_COMMON_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace demandmap {

// Error taxonomy. The CLI maps these onto exit codes: ConfigError -> 2,
// DataError (and subclasses) -> 3, ProviderError (and subclasses) -> 4.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct DataError : Error {
  using Error::Error;
};
struct IoError : DataError {
  using DataError::DataError;
};
struct SchemaError : DataError {
  using DataError::DataError;
};
struct GeometryError : DataError {
  using DataError::DataError;
};
struct DomainError : DataError {
  using DataError::DataError;
};
struct ArgumentError : DataError {
  using DataError::DataError;
};
struct NumericError : DataError {
  using DataError::DataError;
};

struct ProviderError : Error {
  using Error::Error;
};
struct TransportError : ProviderError {
  using ProviderError::ProviderError;
};
struct CredentialError : ProviderError {
  using ProviderError::ProviderError;
};
struct CoverageError : ProviderError {
  using ProviderError::ProviderError;
};
struct IntegrityError : ProviderError {
  using ProviderError::ProviderError;
};

using WarningList = std::vector<std::string>;

// 64-bit FNV-1a. Used for cache keys, stage signatures and checksums in the
// run manifest; not a cryptographic hash.
uint64_t fnv1a64(std::string_view bytes, uint64_t seed = 0xcbf29ce484222325ull);
uint64_t fnv1a64_file(const std::string& path);
std::string to_hex(uint64_t v);

// ISO-8601 UTC instants ("2016-03-02T10:00:00Z", date-only accepted) to and
// from seconds since the Unix epoch.
int64_t parse_iso8601(const std::string& text);
std::string format_iso8601(int64_t unix_seconds);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
bool parse_double(std::string_view s, double& out);
bool parse_int(std::string_view s, int64_t& out);
std::string lower(std::string_view s);

// printf-style formatting into std::string.
std::string strf(const char* fmt, ...) __attribute__((format(printf, 1, 2)));

}  // namespace demandmap

#endif  // DEMANDMAP_COMMON_HPP_
