#include "tiger/training/dataset.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>

#include "tiger/common/error.hpp"
#include "tiger/dsp/wav.hpp"

namespace tiger::training {

void Example::validate() const {
  dsp::validate(mixture);
  if (references.empty()) throw InvalidInput("example '" + id + "': no references");
  for (const auto& r : references) {
    dsp::validate(r);
    if (r.size() != mixture.size() || r.sample_rate != mixture.sample_rate) {
      throw InvalidInput("example '" + id + "': reference length or rate differs from mixture");
    }
  }
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path.string());
  } catch (const YAML::BadFile&) {
    throw IoError("manifest: cannot open '" + path.string() + "'");
  } catch (const YAML::Exception& e) {
    throw InvalidInput("manifest '" + path.string() + "': " + e.what());
  }
  if (!root.IsSequence()) throw InvalidInput("manifest '" + path.string() + "': expected a list");
  const auto base = path.parent_path();
  auto resolve = [&base](const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };
  std::vector<ManifestEntry> out;
  for (std::size_t i = 0; i < root.size(); ++i) {
    const YAML::Node n = root[i];
    try {
      ManifestEntry e;
      e.id = n["id"] ? n["id"].as<std::string>() : "utt" + std::to_string(i);
      if (!n["mix"] || !n["refs"]) throw InvalidInput("entry " + std::to_string(i) + " needs mix and refs");
      e.mix = resolve(n["mix"].as<std::string>());
      for (const auto& r : n["refs"]) e.refs.push_back(resolve(r.as<std::string>()));
      if (n["noise"]) e.noise = resolve(n["noise"].as<std::string>());
      out.push_back(std::move(e));
    } catch (const YAML::Exception& ex) {
      throw InvalidInput("manifest '" + path.string() + "' entry " + std::to_string(i) + ": " +
                         ex.what());
    }
  }
  return out;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path);
  if (!out) throw IoError("manifest: cannot write '" + path.string() + "'");
  for (const auto& e : entries) {
    YAML::Node n;
    n["id"] = e.id;
    n["mix"] = e.mix.generic_string();
    YAML::Node refs(YAML::NodeType::Sequence);
    for (const auto& r : e.refs) refs.push_back(r.generic_string());
    n["refs"] = refs;
    if (e.noise) n["noise"] = e.noise->generic_string();
    YAML::Emitter em;
    em << YAML::Flow << n;
    out << "- " << em.c_str() << "\n";
  }
}

std::vector<Example> load_dataset(const std::filesystem::path& manifest) {
  std::vector<Example> out;
  for (const auto& e : read_manifest(manifest)) {
    Example ex;
    ex.id = e.id;
    ex.mixture = dsp::read_wav(e.mix);
    for (const auto& r : e.refs) ex.references.push_back(dsp::read_wav(r));
    if (e.noise) ex.noise = dsp::read_wav(*e.noise);
    ex.validate();
    out.push_back(std::move(ex));
  }
  if (out.empty()) throw InvalidInput("manifest '" + manifest.string() + "' lists no examples");
  return out;
}

}  // namespace tiger::training
