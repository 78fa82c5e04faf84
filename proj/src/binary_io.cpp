#include "lrm/binary_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>

namespace lrm {

std::string frame_with_checksum(std::string_view magic, std::uint32_t version,
                                std::string_view body) {
  BinaryWriter w;
  w.put_bytes(magic);
  w.put_u32(version);
  w.put_bytes(body);
  w.put_u64(checksum64(body));
  return w.release();
}

std::string_view unframe_with_checksum(std::string_view file, std::string_view magic,
                                       std::uint32_t version) {
  if (file.size() < magic.size() + 4 + 8) throw FormatError("truncated file");
  if (file.substr(0, magic.size()) != magic)
    throw FormatError("bad magic: expected " + std::string(magic));
  BinaryReader header(file.substr(magic.size(), 4));
  auto v = header.get_u32();
  if (v != version)
    throw FormatError("unsupported " + std::string(magic) + " version " + std::to_string(v));
  auto body = file.substr(magic.size() + 4, file.size() - magic.size() - 4 - 8);
  BinaryReader tail(file.substr(file.size() - 8));
  if (tail.get_u64() != checksum64(body)) throw FormatError("checksum mismatch");
  return body;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_atomic(const std::string& path, std::string_view data) {
  namespace fs = std::filesystem;
  auto tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    out.flush();
    if (!out) {
      std::remove(tmp.c_str());
      throw DataError("short write to " + tmp);
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    std::remove(tmp.c_str());
    throw DataError("cannot rename " + tmp + ": " + ec.message());
  }
}

}  // namespace lrm
